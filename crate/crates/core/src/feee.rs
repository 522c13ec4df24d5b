//! Fixed Expectation Energy Ensemble.
//!
//! Normalized states with a prescribed energy expectation `E`. The two linear
//! constraints `Σ P_k = 1` and `Σ P_k E_k = E` eliminate two populations, the
//! last state of the top level (`P_N`) and the last state of the next strictly
//! lower level (`P_{N-1}`). With `D = E_N - E_{N-1}`,
//!
//! ```text
//! a_j = (E_{N-1} - E_j) / D,   b = (E - E_{N-1}) / D
//! P_N     = b + Σ_j a_j q_j
//! P_{N-1} = (1 - b) - Σ_j (1 + a_j) q_j
//! ```
//!
//! where `q` are the remaining free populations. The induced surface measure
//! gives the unnormalized density
//!
//! ```text
//! p(q) = [ Σ_j q_j (1 + a_j) a_j - b² + b ]^(1/2)
//! ```
//!
//! on the polytope where every population is nonnegative. The bracket equals
//! the energy variance `Σ P_k E_k² - E²` divided by `D²`.
//!
//! Sampling uses a random-walk Metropolis–Hastings chain with independent
//! Gaussian increments whose widths follow the approximation-I mean
//! populations `1/(λ + μE_k)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::approx::{solve_lagrange, ApproxError, LagrangeSolution};
use crate::rpse::PopulationVector;
use crate::spectrum::EnergySpectrum;

/// Brackets down to this value are treated as round-off and clamped to zero.
pub const BRACKET_TOLERANCE: f64 = -1e-12;

/// Window length for proposal-scale adaptation during burn-in.
pub const ADAPT_WINDOW: usize = 500;
pub const TARGET_ACCEPTANCE: (f64, f64) = (0.2, 0.5);
pub const DEFAULT_PROPOSAL_SCALE: f64 = 0.5;
pub const DEFAULT_THINNING: usize = 10;
pub const MIN_DEFAULT_BURN_IN: usize = 10_000;

const INIT_BISECTIONS: usize = 60;

#[derive(Debug, Error)]
pub enum FeeeError {
    #[error("energy {energy} outside the open interval (0, {max})")]
    Domain { energy: f64, max: f64 },
    #[error("need at least 3 states, got {0}")]
    TooFewStates(usize),
    #[error("spectrum has a single energy level; the energy constraint is degenerate")]
    FlatSpectrum,
    #[error("expected {expected} free populations, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("density bracket {bracket:e} is negative inside the domain")]
    Consistency { bracket: f64 },
    #[error("cannot eliminate states {lower} and {upper}: need distinct indices with E[upper] > E[lower]")]
    Elimination { lower: usize, upper: usize },
    #[error("no in-domain starting point found")]
    Init,
    #[error("invalid chain configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Approx(#[from] ApproxError),
}

/// The `N-2` independent populations, ordered as in the spectrum with the two
/// eliminated states skipped.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FreePopulations(pub Vec<f64>);

impl FreePopulations {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FreePopulations {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FeeeTarget {
    spectrum: EnergySpectrum,
    energy: f64,
    free_indices: Vec<usize>,
    /// Eliminated state on the lower level (`P_{N-1}` by default).
    lower_index: usize,
    /// Eliminated state on the upper level (`P_N` by default).
    upper_index: usize,
    a: Vec<f64>,
    b: f64,
    // (1 + a_j) a_j and b(1 - b), the affine bracket.
    slope: Vec<f64>,
    intercept: f64,
}

impl FeeeTarget {
    /// Eliminates the last state of the top level and the last state of the
    /// next strictly lower level.
    pub fn new(spectrum: EnergySpectrum, energy: f64) -> Result<Self, FeeeError> {
        let levels = spectrum.eigenvalues();
        let n = levels.len();
        if n < 3 {
            return Err(FeeeError::TooFewStates(n));
        }
        let e_max = spectrum.max_energy();
        let tol = level_tolerance(&spectrum);
        let lower_index = levels.iter().rposition(|&e| e_max - e > tol).ok_or(FeeeError::FlatSpectrum)?;
        Self::with_eliminated(spectrum, energy, lower_index, n - 1)
    }

    /// Same ensemble, with the populations at `lower_index` and `upper_index`
    /// solved from the constraints. Requires `E[upper] > E[lower]`.
    ///
    /// The bracket always equals `Var_P(E) / (E[upper] - E[lower])²`, so
    /// targets over the same spectrum and energy differ only by a constant
    /// factor in density.
    pub fn with_eliminated(
        spectrum: EnergySpectrum,
        energy: f64,
        lower_index: usize,
        upper_index: usize,
    ) -> Result<Self, FeeeError> {
        let levels = spectrum.eigenvalues();
        let n = levels.len();
        if n < 3 {
            return Err(FeeeError::TooFewStates(n));
        }
        let e_max = spectrum.max_energy();
        if !(energy > 0.0 && energy < e_max) {
            return Err(FeeeError::Domain { energy, max: e_max });
        }
        if lower_index >= n
            || upper_index >= n
            || levels[upper_index] - levels[lower_index] <= level_tolerance(&spectrum)
        {
            return Err(FeeeError::Elimination { lower: lower_index, upper: upper_index });
        }
        let e_lower = levels[lower_index];
        let gap = levels[upper_index] - e_lower;

        let free_indices: Vec<usize> = (0..n).filter(|&k| k != lower_index && k != upper_index).collect();
        let a: Vec<f64> = free_indices.iter().map(|&k| (e_lower - levels[k]) / gap).collect();
        let b = (energy - e_lower) / gap;
        let slope = a.iter().map(|a| (1.0 + a) * a).collect();
        Ok(Self { spectrum, energy, free_indices, lower_index, upper_index, a, b, slope, intercept: b * (1.0 - b) })
    }

    /// The equivalent target that eliminates the two most populated states:
    /// the last ground state and the last state of the first excited level
    /// below `E*`, otherwise the top two levels as in [`FeeeTarget::new`].
    pub fn populated_chart(&self) -> Result<Self, FeeeError> {
        if self.energy >= self.spectrum.e_star() {
            return Ok(self.clone());
        }
        let levels = self.spectrum.eigenvalues();
        let tol = level_tolerance(&self.spectrum);
        let ground = levels[0];
        let lower = levels.iter().rposition(|&e| e - ground <= tol).ok_or(FeeeError::FlatSpectrum)?;
        let first_excited = levels.get(lower + 1).copied().ok_or(FeeeError::FlatSpectrum)?;
        let upper = levels.iter().rposition(|&e| e - first_excited <= tol).ok_or(FeeeError::FlatSpectrum)?;
        Self::with_eliminated(self.spectrum.clone(), self.energy, lower, upper)
    }

    /// Convenience constructor from the energy per spin of an `n`-spin spectrum.
    pub fn from_energy_per_spin(spectrum: EnergySpectrum, eps: f64) -> Result<Self, FeeeError> {
        let n = spectrum.n_spins().unwrap_or(1) as f64;
        Self::new(spectrum, eps * n)
    }

    pub fn spectrum(&self) -> &EnergySpectrum {
        &self.spectrum
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn n_states(&self) -> usize {
        self.spectrum.len()
    }

    pub fn n_free(&self) -> usize {
        self.free_indices.len()
    }

    pub fn free_indices(&self) -> &[usize] {
        &self.free_indices
    }

    /// Spectrum indices of the populations solved from the constraints, as
    /// `(lower, upper)`.
    pub fn eliminated_indices(&self) -> (usize, usize) {
        (self.lower_index, self.upper_index)
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `(P_lower, P_upper)` from the free populations; may be negative.
    pub fn eliminated(&self, q: &[f64]) -> (f64, f64) {
        let mut sum_q = 0.0;
        let mut sum_aq = 0.0;
        for (qj, aj) in q.iter().zip(&self.a) {
            sum_q += qj;
            sum_aq += aj * qj;
        }
        let upper = self.b + sum_aq;
        let lower = (1.0 - self.b) - sum_q - sum_aq;
        (lower, upper)
    }

    pub fn in_domain(&self, q: &[f64]) -> bool {
        if q.iter().any(|&x| x < 0.0) {
            return false;
        }
        let (lower, upper) = self.eliminated(q);
        lower >= 0.0 && upper >= 0.0
    }

    /// The affine bracket under the square root; no domain check.
    pub fn bracket(&self, q: &[f64]) -> f64 {
        self.intercept + q.iter().zip(&self.slope).map(|(x, s)| x * s).sum::<f64>()
    }

    /// Full population vector in spectrum order, or `None` outside the domain.
    pub fn reconstruct(&self, q: &FreePopulations) -> Result<Option<PopulationVector>, FeeeError> {
        self.check_len(q.as_slice())?;
        Ok(self.reconstruct_slice(q.as_slice()))
    }

    pub(crate) fn reconstruct_slice(&self, q: &[f64]) -> Option<PopulationVector> {
        if !self.in_domain(q) {
            return None;
        }
        let (lower, upper) = self.eliminated(q);
        let mut p = vec![0.0; self.n_states()];
        for (&k, &x) in self.free_indices.iter().zip(q) {
            p[k] = x;
        }
        p[self.lower_index] = lower;
        p[self.upper_index] = upper;
        Some(PopulationVector::from_vec_unchecked(p))
    }

    /// Free coordinates of a full population vector.
    pub fn free_part(&self, p: &[f64]) -> FreePopulations {
        FreePopulations(self.free_indices.iter().map(|&k| p[k]).collect())
    }

    /// Unnormalized density. Zero outside the domain; a bracket below
    /// [`BRACKET_TOLERANCE`] inside the domain is a consistency fault.
    pub fn density(&self, q: &FreePopulations) -> Result<f64, FeeeError> {
        self.check_len(q.as_slice())?;
        self.density_slice(q.as_slice())
    }

    pub(crate) fn density_slice(&self, q: &[f64]) -> Result<f64, FeeeError> {
        if !self.in_domain(q) {
            return Ok(0.0);
        }
        let bracket = self.bracket(q);
        if bracket >= 0.0 {
            Ok(bracket.sqrt())
        } else if bracket >= BRACKET_TOLERANCE {
            Ok(0.0)
        } else {
            Err(FeeeError::Consistency { bracket })
        }
    }

    fn check_len(&self, q: &[f64]) -> Result<(), FeeeError> {
        if q.len() != self.n_free() {
            return Err(FeeeError::Dimension { expected: self.n_free(), got: q.len() });
        }
        Ok(())
    }

    /// Strictly interior reference point: the uniform state mixed with the
    /// ground state (below `E*`) or the top state (above `E*`) so that its
    /// energy is exactly `E`.
    pub fn reference_point(&self) -> FreePopulations {
        let n = self.n_states() as f64;
        let e_star = self.spectrum.e_star();
        let mut p = vec![0.0; self.n_states()];
        let (anchor, theta) = if self.energy <= e_star {
            (0, 1.0 - self.energy / e_star)
        } else {
            (self.upper_index, (self.energy - e_star) / (self.spectrum.max_energy() - e_star))
        };
        for x in &mut p {
            *x = (1.0 - theta) / n;
        }
        p[anchor] += theta;
        self.free_part(&p)
    }
}

fn level_tolerance(spectrum: &EnergySpectrum) -> f64 {
    1e-12 * spectrum.max_energy().abs().max(1.0)
}

/// Unnormalized density of the free populations, `C ≡ 1`.
pub fn feee_density(q: &FreePopulations, target: &FeeeTarget) -> Result<f64, FeeeError> {
    target.density(q)
}

pub fn reconstruct(q: &FreePopulations, target: &FeeeTarget) -> Result<Option<PopulationVector>, FeeeError> {
    target.reconstruct(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainConfig {
    /// Total number of steps, burn-in included.
    pub steps: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub proposal_scale: f64,
    /// Multiplicative scale adaptation during burn-in.
    pub adapt: bool,
    pub elimination: Elimination,
}

/// Which pair of populations the chain solves from the constraints. Both
/// choices have the same stationary law on the population polytope.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Elimination {
    /// The pair chosen by [`FeeeTarget::new`] or the caller.
    AsGiven,
    /// [`FeeeTarget::populated_chart`]: keeps the random walk away from the
    /// `P ≥ 0` walls of sparsely populated eliminated states.
    #[default]
    MostPopulated,
}

impl ChainConfig {
    /// Burn-in of at least `10·(N-2)` steps, thinning 10, adaptive scale.
    pub fn for_kept_samples(n_states: usize, kept: usize) -> Self {
        let burn_in = (10 * n_states.saturating_sub(2)).max(MIN_DEFAULT_BURN_IN);
        Self {
            steps: burn_in + kept * DEFAULT_THINNING,
            burn_in,
            thinning: DEFAULT_THINNING,
            proposal_scale: DEFAULT_PROPOSAL_SCALE,
            adapt: true,
            elimination: Elimination::default(),
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        let kept = self.kept();
        self.burn_in = burn_in;
        self.steps = burn_in + kept * self.thinning;
        self
    }

    pub fn with_thinning(mut self, thinning: usize) -> Self {
        let kept = self.kept();
        self.thinning = thinning.max(1);
        self.steps = self.burn_in + kept * self.thinning;
        self
    }

    /// Number of samples the chain will emit.
    pub fn kept(&self) -> usize {
        self.steps.saturating_sub(self.burn_in) / self.thinning.max(1)
    }

    fn validate(&self) -> Result<(), FeeeError> {
        if self.thinning == 0 {
            return Err(FeeeError::Config("thinning must be at least 1"));
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale.is_finite()) {
            return Err(FeeeError::Config("proposal scale must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainState {
    pub current: FreePopulations,
    /// Cached `feee_density(current)`.
    pub density_value: f64,
    pub step_index: usize,
    pub accepted_count: usize,
    pub proposal_scale: f64,
    /// Per-coordinate base widths `1/(λ + μE_k)`; the proposal standard
    /// deviation is `proposal_scale` times these.
    pub proposal_widths: Vec<f64>,
}

impl ChainState {
    /// Starts at the approximation-I mean populations. When that point has
    /// zero density the start is moved toward [`FeeeTarget::reference_point`]
    /// by bisection.
    pub fn initial(
        target: &FeeeTarget,
        multipliers: &LagrangeSolution,
        proposal_scale: f64,
    ) -> Result<Self, FeeeError> {
        let levels = target.spectrum().eigenvalues();
        let widths: Vec<f64> = target.free_indices().iter().map(|&k| 1.0 / multipliers.rate(levels[k])).collect();
        let mean_point = widths.clone();

        let start = match target.density_slice(&mean_point)? {
            d if d > 0.0 => mean_point,
            _ => {
                let reference = target.reference_point();
                if target.density(&reference)? <= 0.0 {
                    return Err(FeeeError::Init);
                }
                let mix = |t: f64| -> Vec<f64> {
                    mean_point.iter().zip(&reference.0).map(|(m, r)| (1.0 - t) * m + t * r).collect()
                };
                let (mut bad, mut good) = (0.0, 1.0);
                for _ in 0..INIT_BISECTIONS {
                    let mid = 0.5 * (bad + good);
                    if target.density_slice(&mix(mid))? > 0.0 {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
                mix(good)
            }
        };
        let density_value = target.density_slice(&start)?;
        Ok(Self {
            current: FreePopulations(start),
            density_value,
            step_index: 0,
            accepted_count: 0,
            proposal_scale,
            proposal_widths: widths,
        })
    }

    /// Proposal standard deviation of free coordinate `j`.
    pub fn proposal_std(&self, j: usize) -> f64 {
        self.proposal_scale * self.proposal_widths[j]
    }

    /// `Y = X + Z` from standard-normal draws `normals`.
    pub fn propose_from_normals(&self, normals: &[f64]) -> FreePopulations {
        FreePopulations(
            self.current.0.iter().enumerate().zip(normals).map(|((j, x), z)| x + self.proposal_std(j) * z).collect(),
        )
    }

    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> FreePopulations {
        let normals: Vec<f64> = (0..self.current.0.len()).map(|_| rng.sample(StandardNormal)).collect();
        self.propose_from_normals(&normals)
    }

    /// Metropolis decision for a given proposal and uniform `u ∈ [0, 1)`:
    /// accept when `u < min(1, p(Y)/p(X))`.
    pub fn try_move(&mut self, target: &FeeeTarget, proposal: FreePopulations, u: f64) -> Result<bool, FeeeError> {
        target.check_len(proposal.as_slice())?;
        self.step_index += 1;
        let density = target.density_slice(proposal.as_slice())?;
        let accept = density > 0.0 && u < (density / self.density_value).min(1.0);
        if accept {
            self.current = proposal;
            self.density_value = density;
            self.accepted_count += 1;
        }
        Ok(accept)
    }

    /// Same as `propose` + `try_move`, reusing `scratch` for the proposal.
    fn step_in_place<R: Rng + ?Sized>(
        &mut self,
        target: &FeeeTarget,
        rng: &mut R,
        scratch: &mut Vec<f64>,
    ) -> Result<bool, FeeeError> {
        scratch.clear();
        for (j, &x) in self.current.0.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            scratch.push(x + self.proposal_std(j) * z);
        }
        let u: f64 = rng.random();
        self.step_index += 1;
        let density = target.density_slice(scratch)?;
        let accept = density > 0.0 && u < (density / self.density_value).min(1.0);
        if accept {
            std::mem::swap(&mut self.current.0, scratch);
            self.density_value = density;
            self.accepted_count += 1;
        }
        Ok(accept)
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.step_index == 0 {
            0.0
        } else {
            self.accepted_count as f64 / self.step_index as f64
        }
    }
}

pub fn propose<R: Rng + ?Sized>(state: &ChainState, rng: &mut R) -> FreePopulations {
    state.propose(rng)
}

/// One random-walk Metropolis–Hastings step. Returns whether the move was accepted.
pub fn mh_step<R: Rng + ?Sized>(state: &mut ChainState, target: &FeeeTarget, rng: &mut R) -> Result<bool, FeeeError> {
    let proposal = state.propose(rng);
    let u: f64 = rng.random();
    state.try_move(target, proposal, u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainSummary {
    pub steps: usize,
    pub kept: usize,
    /// Acceptance over the post-burn-in steps.
    pub acceptance_rate: f64,
    pub burn_in_acceptance_rate: f64,
    /// Proposal scale used after burn-in.
    pub proposal_scale: f64,
}

/// A Metropolis–Hastings chain over a [`FeeeTarget`], yielding reconstructed
/// population vectors after burn-in, one every `thinning` steps.
pub struct FeeeChain<R> {
    target: FeeeTarget,
    config: ChainConfig,
    state: ChainState,
    multipliers: LagrangeSolution,
    rng: R,
    scratch: Vec<f64>,
    burned_in: bool,
    burn_in_accepted: usize,
    kept: usize,
    failed: bool,
}

/// Builds the chain; nothing is sampled until the iterator is polled.
pub fn run_chain<R: Rng>(target: &FeeeTarget, config: ChainConfig, rng: R) -> Result<FeeeChain<R>, FeeeError> {
    FeeeChain::new(target, config, rng)
}

impl<R: Rng> FeeeChain<R> {
    pub fn new(target: &FeeeTarget, config: ChainConfig, rng: R) -> Result<Self, FeeeError> {
        config.validate()?;
        let target = match config.elimination {
            Elimination::AsGiven => target.clone(),
            Elimination::MostPopulated => target.populated_chart()?,
        };
        let multipliers = solve_lagrange(target.spectrum(), target.energy())?;
        let state = ChainState::initial(&target, &multipliers, config.proposal_scale)?;
        let scratch = Vec::with_capacity(target.n_free());
        Ok(Self {
            target,
            config,
            state,
            multipliers,
            rng,
            scratch,
            burned_in: false,
            burn_in_accepted: 0,
            kept: 0,
            failed: false,
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    /// The target the chain actually walks on.
    pub fn chart(&self) -> &FeeeTarget {
        &self.target
    }

    pub fn multipliers(&self) -> &LagrangeSolution {
        &self.multipliers
    }

    fn burn_in(&mut self) -> Result<(), FeeeError> {
        let burn_in = self.config.burn_in.min(self.config.steps);
        let mut window_accepts = 0;
        while self.state.step_index < burn_in {
            if self.state.step_in_place(&self.target, &mut self.rng, &mut self.scratch)? {
                window_accepts += 1;
            }
            if self.config.adapt && self.state.step_index.is_multiple_of(ADAPT_WINDOW) {
                let rate = window_accepts as f64 / ADAPT_WINDOW as f64;
                if rate < TARGET_ACCEPTANCE.0 {
                    self.state.proposal_scale *= 0.5;
                } else if rate > TARGET_ACCEPTANCE.1 {
                    self.state.proposal_scale *= 2.0;
                }
                window_accepts = 0;
            }
        }
        self.burn_in_accepted = self.state.accepted_count;
        self.burned_in = true;
        Ok(())
    }

    pub fn summary(&self) -> ChainSummary {
        let burn_steps = self.config.burn_in.min(self.state.step_index);
        let post_steps = self.state.step_index - burn_steps;
        ChainSummary {
            steps: self.state.step_index,
            kept: self.kept,
            acceptance_rate: if post_steps == 0 {
                0.0
            } else {
                (self.state.accepted_count - self.burn_in_accepted) as f64 / post_steps as f64
            },
            burn_in_acceptance_rate: if burn_steps == 0 {
                0.0
            } else {
                self.burn_in_accepted as f64 / burn_steps as f64
            },
            proposal_scale: self.state.proposal_scale,
        }
    }

    fn advance(&mut self) -> Result<Option<PopulationVector>, FeeeError> {
        if !self.burned_in {
            self.burn_in()?;
        }
        while self.state.step_index < self.config.steps {
            self.state.step_in_place(&self.target, &mut self.rng, &mut self.scratch)?;
            if (self.state.step_index - self.config.burn_in).is_multiple_of(self.config.thinning) {
                self.kept += 1;
                let p = self.target.reconstruct_slice(&self.state.current.0).ok_or(FeeeError::Init)?;
                return Ok(Some(p));
            }
        }
        Ok(None)
    }
}

impl<R: Rng> Iterator for FeeeChain<R> {
    type Item = Result<PopulationVector, FeeeError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.advance() {
            Ok(p) => p.map(Ok),
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::spectrum::{build_spin_spectrum, identical_spins, ShiftPolicy};
    use proptest::prelude::*;
    use rand::Rng;

    fn two_spin_target(energy: f64) -> FeeeTarget {
        FeeeTarget::new(identical_spins(2).unwrap(), energy).unwrap()
    }

    #[test]
    fn coefficients_for_two_spins() {
        let t = two_spin_target(1.0);
        assert_eq!(t.eliminated_indices(), (2, 3));
        assert_eq!(t.a(), &[1.0, 0.0]);
        assert_eq!(t.b(), 0.0);
    }

    #[test]
    fn reconstruct_interior_and_boundary() {
        let t = two_spin_target(1.0);
        let p = t.reconstruct(&vec![0.2, 0.3].into()).unwrap().unwrap();
        let expected = [0.2, 0.3, 0.3, 0.2];
        assert!(p.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-15));
        let p = t.reconstruct(&vec![0.0, 0.0].into()).unwrap().unwrap();
        assert_eq!(p.as_slice(), &[0.0, 0.0, 1.0, 0.0]);
        assert!(t.reconstruct(&vec![0.6, 0.0].into()).unwrap().is_none());
    }

    #[test]
    fn density_ratio_is_sqrt_of_ground_ratio() {
        // The bracket reduces to 2·P_1 for this spectrum and energy.
        let t = two_spin_target(1.0);
        for x in [0.0, 0.1, 0.3, 0.55] {
            let hi = t.density(&vec![0.2, x].into()).unwrap();
            let lo = t.density(&vec![0.05, x].into()).unwrap();
            assert!((hi / lo - 2.0).abs() < 1e-14, "x={x}");
            assert!((hi - 0.4f64.sqrt()).abs() < 1e-15);
        }
        assert_eq!(t.density(&vec![0.0, 0.4].into()).unwrap(), 0.0);
    }

    #[test]
    fn density_zero_out_of_domain() {
        let t = two_spin_target(1.0);
        // P_3 = 1 - 2·0.45 - 0.3 < 0
        assert_eq!(t.density(&vec![0.45, 0.3].into()).unwrap(), 0.0);
        assert_eq!(t.density(&vec![-0.1, 0.3].into()).unwrap(), 0.0);
        assert!(matches!(t.density(&vec![0.1].into()), Err(FeeeError::Dimension { .. })));
    }

    #[test]
    fn negative_bracket_in_domain_is_a_fault() {
        let mut t = two_spin_target(1.0);
        t.intercept = -1e-3;
        assert!(matches!(t.density(&vec![0.0, 0.2].into()), Err(FeeeError::Consistency { .. })));
        t.intercept = -1e-13;
        assert_eq!(t.density(&vec![0.0, 0.2].into()).unwrap(), 0.0);
    }

    #[test]
    fn target_construction_errors() {
        let s = identical_spins(2).unwrap();
        assert!(matches!(FeeeTarget::new(s.clone(), 0.0), Err(FeeeError::Domain { .. })));
        assert!(matches!(FeeeTarget::new(s.clone(), 2.0), Err(FeeeError::Domain { .. })));
        assert!(matches!(FeeeTarget::new(identical_spins(1).unwrap(), 0.5), Err(FeeeError::TooFewStates(2))));
        let flat = EnergySpectrum::from_eigenvalues(vec![0.0, 0.0, 0.0], ShiftPolicy::Reject).unwrap();
        assert!(matches!(FeeeTarget::new(flat, 0.0), Err(FeeeError::FlatSpectrum)));
    }

    #[test]
    fn degenerate_top_level_eliminates_last_indices() {
        let s = EnergySpectrum::from_eigenvalues(vec![0.0, 1.0, 1.0, 2.0, 2.0], ShiftPolicy::Reject).unwrap();
        let t = FeeeTarget::new(s, 0.8).unwrap();
        assert_eq!(t.eliminated_indices(), (2, 4));
        assert_eq!(t.free_indices(), &[0, 1, 3]);
        // The free state on the top level has a = -1.
        assert_eq!(t.a()[2], -1.0);
        let p = t.reconstruct(&vec![0.3, 0.2, 0.1].into()).unwrap().unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p.expectation(t.spectrum().eigenvalues()) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn bracket_is_energy_variance() {
        let s = build_spin_spectrum(3, &[0.7, 1.0, 1.9]).unwrap();
        let t = FeeeTarget::new(s.clone(), 1.1).unwrap();
        let gap = s.max_energy() - s.eigenvalues()[t.eliminated_indices().0];
        let mut rng = stream_rng(2, 0);
        let mut checked = 0;
        while checked < 50 {
            let q: Vec<f64> = (0..t.n_free()).map(|_| rng.random::<f64>() * 0.3).collect();
            if let Some(p) = t.reconstruct(&q.clone().into()).unwrap() {
                let e2: f64 = p.iter().zip(s.eigenvalues()).map(|(p, e)| p * e * e).sum();
                let var = e2 - 1.1 * 1.1;
                assert!((t.bracket(&q) - var / (gap * gap)).abs() < 1e-12);
                checked += 1;
            }
        }
    }

    #[test]
    fn populated_chart_below_and_above_estar() {
        let s = identical_spins(2).unwrap();
        let low = FeeeTarget::new(s.clone(), 0.5).unwrap().populated_chart().unwrap();
        assert_eq!(low.eliminated_indices(), (0, 2));
        let high = FeeeTarget::new(s, 1.5).unwrap().populated_chart().unwrap();
        assert_eq!(high.eliminated_indices(), (2, 3));
    }

    #[test]
    fn charts_differ_by_a_constant_factor() {
        let s = build_spin_spectrum(3, &[0.6, 1.0, 1.5]).unwrap();
        let stated = FeeeTarget::new(s.clone(), 0.9).unwrap();
        let chart = stated.populated_chart().unwrap();
        assert_ne!(stated.eliminated_indices(), chart.eliminated_indices());
        let mut rng = stream_rng(21, 0);
        let mut ratios = Vec::new();
        while ratios.len() < 30 {
            let q: Vec<f64> = (0..stated.n_free()).map(|_| rng.random::<f64>() * 0.3).collect();
            if let Some(p) = stated.reconstruct(&q.clone().into()).unwrap() {
                let d1 = stated.density(&q.into()).unwrap();
                let d2 = chart.density(&chart.free_part(&p)).unwrap();
                ratios.push(d1 / d2);
            }
        }
        assert!(ratios.iter().all(|r| (r - ratios[0]).abs() < 1e-12 * ratios[0]));
    }

    #[test]
    fn bad_elimination_rejected() {
        let s = identical_spins(2).unwrap();
        assert!(matches!(FeeeTarget::with_eliminated(s.clone(), 1.0, 1, 2), Err(FeeeError::Elimination { .. })));
        assert!(matches!(FeeeTarget::with_eliminated(s, 1.0, 3, 0), Err(FeeeError::Elimination { .. })));
    }

    #[test]
    fn reference_point_is_interior() {
        for energy in [0.05, 1.0, 1.5, 2.9] {
            let t = FeeeTarget::new(identical_spins(3).unwrap(), energy).unwrap();
            let q = t.reference_point();
            assert!(t.density(&q).unwrap() > 0.0, "E={energy}");
            let p = t.reconstruct(&q).unwrap().unwrap();
            assert!((p.expectation(t.spectrum().eigenvalues()) - energy).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_draw_is_identity_move() {
        let t = two_spin_target(0.6);
        let sol = solve_lagrange(t.spectrum(), 0.6).unwrap();
        let s = ChainState::initial(&t, &sol, 0.5).unwrap();
        assert_eq!(s.propose_from_normals(&[0.0, 0.0]), s.current);
    }

    #[test]
    fn proposal_statistics() {
        let t = FeeeTarget::new(identical_spins(3).unwrap(), 1.0).unwrap();
        let sol = solve_lagrange(t.spectrum(), 1.0).unwrap();
        let s = ChainState::initial(&t, &sol, 0.5).unwrap();
        let m = 100_000;
        let mut rng = stream_rng(4, 0);
        let d = t.n_free();
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        let mut cross = 0.0;
        for _ in 0..m {
            let y = s.propose(&mut rng);
            let z: Vec<f64> = y.0.iter().zip(&s.current.0).map(|(a, b)| a - b).collect();
            for j in 0..d {
                sum[j] += z[j];
                sq[j] += z[j] * z[j];
            }
            cross += z[0] * z[1] / (s.proposal_std(0) * s.proposal_std(1));
        }
        for j in 0..d {
            let var = sq[j] / m as f64 - (sum[j] / m as f64).powi(2);
            let sd = var.sqrt();
            // Standard error of a sample standard deviation is σ/√(2m).
            let se = s.proposal_std(j) / (2.0 * m as f64).sqrt();
            assert!((sd - s.proposal_std(j)).abs() < 3.0 * se, "j={j}");
        }
        assert!((cross / m as f64).abs() < 3.0 / (m as f64).sqrt());
    }

    #[test]
    fn uphill_move_always_accepted() {
        let t = two_spin_target(1.0);
        let sol = solve_lagrange(t.spectrum(), 1.0).unwrap();
        let mut s = ChainState::initial(&t, &sol, 0.5).unwrap();
        s.current = vec![0.05, 0.1].into();
        s.density_value = t.density(&s.current).unwrap();
        // Density ratio 2.
        assert!(s.try_move(&t, vec![0.2, 0.1].into(), 0.999_999).unwrap());
        assert_eq!((s.step_index, s.accepted_count), (1, 1));
        assert_eq!(s.current.0, vec![0.2, 0.1]);
    }

    #[test]
    fn out_of_domain_move_rejected() {
        let t = two_spin_target(1.0);
        let sol = solve_lagrange(t.spectrum(), 1.0).unwrap();
        let mut s = ChainState::initial(&t, &sol, 0.5).unwrap();
        let before = s.current.clone();
        assert!(!s.try_move(&t, vec![-0.01, 0.1].into(), 0.0).unwrap());
        assert_eq!(s.current, before);
        assert_eq!((s.step_index, s.accepted_count), (1, 0));
    }

    #[test]
    fn full_burn_in_emits_nothing() {
        let t = two_spin_target(1.0);
        let config = ChainConfig {
            steps: 1000,
            burn_in: 1000,
            thinning: 10,
            proposal_scale: 0.5,
            adapt: true,
            elimination: Elimination::MostPopulated,
        };
        let chain = run_chain(&t, config, stream_rng(1, 0)).unwrap();
        assert_eq!(chain.count(), 0);
    }

    #[test]
    fn emitted_count_and_constraints() {
        let t = FeeeTarget::new(identical_spins(4).unwrap(), 0.9).unwrap();
        let config = ChainConfig {
            steps: 12_345,
            burn_in: 2_000,
            thinning: 7,
            proposal_scale: 0.5,
            adapt: true,
            elimination: Elimination::MostPopulated,
        };
        let mut chain = run_chain(&t, config, stream_rng(8, 0)).unwrap();
        let samples: Vec<PopulationVector> = chain.by_ref().collect::<Result<_, _>>().unwrap();
        assert_eq!(samples.len(), (12_345 - 2_000) / 7);
        assert_eq!(chain.summary().kept, samples.len());
        for p in &samples {
            assert!(p.iter().all(|&x| x >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!((p.expectation(t.spectrum().eigenvalues()) - 0.9).abs() < 1e-10);
        }
        let acc = chain.summary().acceptance_rate;
        assert!(acc > 0.05 && acc < 0.9, "acceptance {acc}");
    }

    #[test]
    fn chain_is_deterministic_for_a_seed() {
        let t = FeeeTarget::new(identical_spins(3).unwrap(), 0.7).unwrap();
        let config = ChainConfig::for_kept_samples(8, 200);
        let a: Vec<_> = run_chain(&t, config, stream_rng(5, 1)).unwrap().map(Result::unwrap).collect();
        let b: Vec<_> = run_chain(&t, config, stream_rng(5, 1)).unwrap().map(Result::unwrap).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn acceptance_decreases_with_scale() {
        let t = FeeeTarget::new(identical_spins(3).unwrap(), 1.0).unwrap();
        let mut prev = 1.0;
        for k in 0..8 {
            let scale = 0.1 * 10f64.powf(k as f64 / 7.0);
            let config = ChainConfig {
                steps: 60_000,
                burn_in: 0,
                thinning: 1,
                proposal_scale: scale,
                adapt: false,
                elimination: Elimination::MostPopulated,
            };
            let mut chain = run_chain(&t, config, stream_rng(3, k)).unwrap();
            chain.by_ref().for_each(drop);
            let acc = chain.summary().acceptance_rate;
            assert!(acc <= prev, "scale {scale}: {acc} > {prev}");
            prev = acc;
        }
    }

    #[test]
    fn bad_config_rejected() {
        let t = two_spin_target(1.0);
        let config = ChainConfig {
            steps: 10,
            burn_in: 0,
            thinning: 0,
            proposal_scale: 0.5,
            adapt: false,
            elimination: Elimination::MostPopulated,
        };
        assert!(matches!(run_chain(&t, config, stream_rng(1, 0)), Err(FeeeError::Config(_))));
    }

    proptest! {
        #[test]
        fn reconstruction_satisfies_constraints(
            freqs in proptest::collection::vec(0.2f64..3.0, 2..5),
            frac in 0.02f64..0.98,
            seed in any::<u64>(),
        ) {
            let s = build_spin_spectrum(freqs.len(), &freqs).unwrap();
            let energy = frac * s.max_energy();
            let t = FeeeTarget::new(s.clone(), energy).unwrap();
            let mut rng = stream_rng(seed, 0);
            let q: Vec<f64> = (0..t.n_free()).map(|_| rng.random::<f64>() * 2.0 / t.n_free() as f64).collect();
            if let Some(p) = t.reconstruct(&q.clone().into()).unwrap() {
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!((p.expectation(s.eigenvalues()) - energy).abs() < 1e-12 * s.max_energy().max(1.0));
                prop_assert!(t.density(&q.into()).unwrap() >= 0.0);
            }
        }
    }
}
