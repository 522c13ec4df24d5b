//! Maximum-entropy approximations of the ensembles.
//!
//! Populations are replaced by independent surrogate variables `η_k ≥ 0` whose
//! *means* satisfy the ensemble constraints. Minimizing the information
//! functional under those mean constraints yields factorized exponential laws:
//!
//! * uniform ensemble: every `η_k` has rate `N`;
//! * fixed expectation energy, approximation I: rates `λ + μE_k` with the two
//!   multipliers fixed by `Σ 1/(λ+μE_k) = 1` and `Σ E_k/(λ+μE_k) = E`;
//! * fixed expectation energy, approximation II: the ground variable is pinned
//!   to `a_1 = 1 - E/(N-1) · Σ_{k≥2} 1/E_k` and the others have rates
//!   `(N-1)E_k/E` (multipliers `λ = 0`, `μ = (N-1)/E`).
//!
//! Mean entropies under these laws follow from `E[-η ln η] = (ln r - 1 + γ)/r`
//! for an exponential variable of rate `r`.

use serde::Serialize;
use thiserror::Error;

use crate::spectrum::{EnergySpectrum, SpectrumError};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Bisection stops once the bracket on `z` is this tight (relative).
pub const Z_TOLERANCE: f64 = 1e-13;
/// Both multiplier constraints must hold to this absolute accuracy.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

const MAX_BRACKET_EXPANSIONS: usize = 400;
const MAX_BISECTIONS: usize = 2_000;

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error("energy {energy} outside the open interval (0, {max})")]
    Domain { energy: f64, max: f64 },
    #[error("could not bracket the multiplier equation for E = {0}")]
    Bracket(f64),
    #[error("multiplier residual {0:e} exceeds tolerance")]
    Residual(f64),
    #[error("approximation II needs a_1 >= 0, got {a1} (energy too high for a pinned ground population)")]
    Regime { a1: f64 },
    #[error("need at least {need} states, got {got}")]
    TooFewStates { need: usize, got: usize },
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    BelowEstar,
    AtEstar,
    AboveEstar,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangeSolution {
    pub lambda: f64,
    pub mu: f64,
    /// Ratio `λ/μ`; infinite at `E = E*`.
    pub z: f64,
    pub residual_norm: f64,
    pub branch: Branch,
    // Rates are evaluated as `μ·((e - anchor) + offset)` with `offset = z + anchor`,
    // which avoids cancellation between `λ` and `μE` near the top of the spectrum.
    #[serde(skip)]
    anchor: f64,
    #[serde(skip)]
    offset: f64,
}

impl LagrangeSolution {
    /// Exponential rate `λ + μE` of a state with energy `e`.
    pub fn rate(&self, e: f64) -> f64 {
        if self.mu == 0.0 {
            self.lambda
        } else {
            self.mu * ((e - self.anchor) + self.offset)
        }
    }

    /// `max(|Σ 1/r_k - 1|, |Σ E_k/r_k - E|)`.
    pub fn residuals(&self, levels: &[f64], energy: f64) -> (f64, f64) {
        let (mut norm, mut en) = (0.0, 0.0);
        for &e in levels {
            let inv = 1.0 / self.rate(e);
            norm += inv;
            en += e * inv;
        }
        ((norm - 1.0).abs(), (en - energy).abs())
    }
}

/// Ratio `Σ E_k/(z+E_k) / Σ 1/(z+E_k)`, evaluated from the per-level offsets `z + E_k`.
fn mean_energy(levels: &[f64], offset: impl Fn(f64) -> f64) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for &e in levels {
        let inv = 1.0 / offset(e);
        num += e * inv;
        den += inv;
    }
    (num / den, den)
}

/// Bisection on a positive variable `t` for an increasing function `f(t) - target`.
/// Geometric midpoints are used while the bracket spans more than a factor of two.
fn bisect_increasing(f: impl Fn(f64) -> f64, target: f64, start: (f64, f64)) -> Option<f64> {
    let (mut lo, mut hi) = start;
    let mut expansions = 0;
    while f(lo) > target {
        lo /= 4.0;
        expansions += 1;
        if expansions > MAX_BRACKET_EXPANSIONS || lo == 0.0 {
            return None;
        }
    }
    while f(hi) < target {
        hi *= 4.0;
        expansions += 1;
        if expansions > MAX_BRACKET_EXPANSIONS || !hi.is_finite() {
            return None;
        }
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= Z_TOLERANCE * 1e-3 * hi {
            break;
        }
        let mid = if hi > 2.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Solves for the approximation-I multipliers `(λ, μ)`.
///
/// With `z = λ/μ` the normalization gives `μ = Σ 1/(z+E_k)` and the energy
/// condition reduces to a scalar equation in `z`, monotone on `z > 0` (energies
/// below `E*`) and on `z < -E_N` (energies above `E*`). The upper branch is
/// searched in `w = -1/(z+E_N) > 0`.
pub fn solve_lagrange(spec: &EnergySpectrum, energy: f64) -> Result<LagrangeSolution, ApproxError> {
    let levels = spec.eigenvalues();
    let n = levels.len();
    let e_max = spec.max_energy();
    if !(energy > 0.0 && energy < e_max) {
        return Err(ApproxError::Domain { energy, max: e_max });
    }
    let e_star = spec.e_star();

    let (lambda, mu, z, branch, anchor, offset) = if (energy - e_star).abs() <= 1e-14 * e_star.max(1.0) {
        (n as f64, 0.0, f64::INFINITY, Branch::AtEstar, 0.0, 0.0)
    } else if energy < e_star {
        let g = |z: f64| mean_energy(levels, |e| z + e).0;
        let z = bisect_increasing(g, energy, (1e-6, 10.0 * e_max)).ok_or(ApproxError::Bracket(energy))?;
        let mu = mean_energy(levels, |e| z + e).1;
        (z * mu, mu, z, Branch::BelowEstar, 0.0, z)
    } else {
        let offset = |w: f64| move |e: f64| (e - e_max) - 1.0 / w;
        let g = |w: f64| mean_energy(levels, offset(w)).0;
        let w = bisect_increasing(g, energy, (1e-6, 10.0 / e_max)).ok_or(ApproxError::Bracket(energy))?;
        let mu = mean_energy(levels, offset(w)).1;
        let z = -e_max - 1.0 / w;
        (z * mu, mu, z, Branch::AboveEstar, e_max, -1.0 / w)
    };

    let mut sol = LagrangeSolution { lambda, mu, z, residual_norm: 0.0, branch, anchor, offset };
    let (r1, r2) = sol.residuals(levels, energy);
    sol.residual_norm = r1.max(r2);
    if !(sol.residual_norm < RESIDUAL_TOLERANCE) {
        return Err(ApproxError::Residual(sol.residual_norm));
    }
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ApproxKind {
    #[serde(rename = "RPSE")]
    Rpse,
    #[serde(rename = "FEEE_I")]
    FeeeI,
    #[serde(rename = "FEEE_II")]
    FeeeII,
}

/// Factorized law over the surrogate variables.
///
/// For [`ApproxKind::FeeeII`] the ground variable is a point mass at
/// `ground_delta`; its entry in `rates` is `+∞` (zero width).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxDistribution {
    pub kind: ApproxKind,
    pub rates: Vec<f64>,
    pub ground_delta: Option<f64>,
}

impl ApproxDistribution {
    pub fn means(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.rates.iter().map(|r| 1.0 / r).collect();
        if let Some(a1) = self.ground_delta {
            m[0] = a1;
        }
        m
    }

    /// Marginal density of `η_k` at `eta` (exponential components only).
    pub fn marginal_density(&self, k: usize, eta: f64) -> f64 {
        let r = self.rates[k];
        if eta < 0.0 || !r.is_finite() {
            return 0.0;
        }
        r * (-r * eta).exp()
    }

    /// Variance of `Σ η_k`; the pinned ground variable contributes nothing.
    pub fn sum_variance(&self) -> f64 {
        self.rates.iter().filter(|r| r.is_finite()).map(|r| 1.0 / (r * r)).sum()
    }
}

pub fn rpse_approx(n_states: usize) -> ApproxDistribution {
    assert!(n_states >= 1, "need at least one state");
    ApproxDistribution { kind: ApproxKind::Rpse, rates: vec![n_states as f64; n_states], ground_delta: None }
}

pub fn feee_approx_i(spec: &EnergySpectrum, energy: f64) -> Result<ApproxDistribution, ApproxError> {
    let sol = solve_lagrange(spec, energy)?;
    Ok(feee_approx_i_from(spec, &sol))
}

pub fn feee_approx_i_from(spec: &EnergySpectrum, sol: &LagrangeSolution) -> ApproxDistribution {
    ApproxDistribution {
        kind: ApproxKind::FeeeI,
        rates: spec.eigenvalues().iter().map(|&e| sol.rate(e)).collect(),
        ground_delta: None,
    }
}

/// Closed-form stationary point of the information functional when the ground
/// variable is restricted to a Gaussian profile: `λ = 0`, `μ = (N-1)/E`, centre
/// `a_1` and zero width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinnedGroundSolution {
    pub lambda: f64,
    pub mu: f64,
    pub a1: f64,
    /// Inverse of the Gaussian sharpness parameter; zero means a Dirac profile.
    pub inverse_a2: f64,
}

/// Residuals of the stationarity system at a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinnedGroundResiduals {
    /// `a_1 + Σ_{k≥2} 1/(λ+μE_k) - 1`
    pub normalization: f64,
    /// `E_1 a_1 + Σ_{k≥2} E_k/(λ+μE_k) - E`
    pub energy: f64,
    /// `(N-1)/μ + (z/μ) Σ_{k≥2} 1/(z+E_k) - E` with `z = λ/μ`
    pub energy_z_form: f64,
    /// Derivative in `a_1`: `-zμ`.
    pub centre_stationarity: f64,
    /// Derivative in `a_2`: `-1/a_2`.
    pub width_stationarity: f64,
}

impl PinnedGroundResiduals {
    pub fn max_abs(&self) -> f64 {
        [self.normalization, self.energy, self.energy_z_form, self.centre_stationarity, self.width_stationarity]
            .iter()
            .fold(0.0f64, |m, r| m.max(r.abs()))
    }
}

impl PinnedGroundSolution {
    pub fn new(spec: &EnergySpectrum, energy: f64) -> Result<Self, ApproxError> {
        let n = spec.len();
        if n < 2 {
            return Err(ApproxError::TooFewStates { need: 2, got: n });
        }
        if !(energy > 0.0) {
            return Err(ApproxError::Domain { energy, max: spec.max_energy() });
        }
        let c = spec.constants()?;
        let m = (n - 1) as f64;
        Ok(Self { lambda: 0.0, mu: m / energy, a1: 1.0 - energy / m * c.s0, inverse_a2: 0.0 })
    }

    pub fn residuals(&self, spec: &EnergySpectrum, energy: f64) -> PinnedGroundResiduals {
        let levels = spec.eigenvalues();
        let n = levels.len();
        let z = self.lambda / self.mu;
        let (mut norm, mut en, mut zsum) = (self.a1, levels[0] * self.a1, 0.0);
        for &e in &levels[1..] {
            let inv = 1.0 / (self.lambda + self.mu * e);
            norm += inv;
            en += e * inv;
            zsum += 1.0 / (z + e);
        }
        PinnedGroundResiduals {
            normalization: norm - 1.0,
            energy: en - energy,
            energy_z_form: (n - 1) as f64 / self.mu + z / self.mu * zsum - energy,
            centre_stationarity: -z * self.mu,
            width_stationarity: -self.inverse_a2,
        }
    }
}

pub fn feee_approx_ii(spec: &EnergySpectrum, energy: f64) -> Result<ApproxDistribution, ApproxError> {
    let sol = PinnedGroundSolution::new(spec, energy)?;
    if sol.a1 < 0.0 {
        return Err(ApproxError::Regime { a1: sol.a1 });
    }
    let mut rates: Vec<f64> = spec.eigenvalues().iter().map(|&e| sol.lambda + sol.mu * e).collect();
    rates[0] = f64::INFINITY;
    Ok(ApproxDistribution { kind: ApproxKind::FeeeII, rates, ground_delta: Some(sol.a1) })
}

fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `ln N - (1 - γ)`: large-`N` mean entropy of the uniform ensemble.
pub fn mean_entropy_rpse(n_states: usize) -> f64 {
    (n_states as f64).ln() - (1.0 - EULER_GAMMA)
}

pub fn mean_entropy_feee_i(spec: &EnergySpectrum, energy: f64) -> Result<f64, ApproxError> {
    let sol = solve_lagrange(spec, energy)?;
    Ok(mean_entropy_from_rates(&feee_approx_i_from(spec, &sol)))
}

/// `Σ ln(r_k)/r_k - (1 - γ)` for a law whose means sum to one.
pub fn mean_entropy_from_rates(dist: &ApproxDistribution) -> f64 {
    dist.rates.iter().filter(|r| r.is_finite()).map(|r| r.ln() / r).sum::<f64>()
        - (1.0 - EULER_GAMMA) * dist.rates.iter().filter(|r| r.is_finite()).map(|r| 1.0 / r).sum::<f64>()
        - dist.ground_delta.map_or(0.0, xlnx)
}

/// Mean entropy under approximation II, summed term by term over the means:
/// `-Σ ⟨η_k⟩ ln⟨η_k⟩ - (1 - γ)(1 - ⟨η_1⟩)`.
pub fn mean_entropy_feee_ii(spec: &EnergySpectrum, energy: f64) -> Result<f64, ApproxError> {
    let dist = feee_approx_ii(spec, energy)?;
    let means = dist.means();
    let a1 = means[0];
    Ok(-means.iter().map(|&m| xlnx(m)).sum::<f64>() - (1.0 - EULER_GAMMA) * (1.0 - a1))
}

/// The same mean entropy written through the spectral sums `S0` and `F0`,
/// `-(1-eS0) ln(1-eS0) - eS0 ln e + eF0 - (1-γ) eS0`, with the scaled energy
/// `e = E/(N-1)` that makes it identical to [`mean_entropy_feee_ii`].
pub fn mean_entropy_feee_ii_spectral(spec: &EnergySpectrum, energy: f64) -> Result<f64, ApproxError> {
    let sol = PinnedGroundSolution::new(spec, energy)?;
    if sol.a1 < 0.0 {
        return Err(ApproxError::Regime { a1: sol.a1 });
    }
    let c = spec.constants()?;
    let e = energy / (spec.len() - 1) as f64;
    let es0 = e * c.s0;
    Ok(-xlnx(1.0 - es0) - es0 * e.ln() + e * c.f0 - (1.0 - EULER_GAMMA) * es0)
}

/// Leading-order relative width `σ_S/⟨S⟩ ≈ 1/√N` of the entropy under the
/// factorized uniform-ensemble law.
pub fn entropy_rel_width_rpse(n_states: usize) -> f64 {
    1.0 / (n_states as f64).sqrt()
}
