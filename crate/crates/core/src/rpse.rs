//! Random Pure State Ensemble: states drawn uniformly from the unit sphere of
//! an `N`-dimensional Hilbert space.
//!
//! The populations of such states are uniform on the probability simplex
//! (constant density `(N-1)!` in the first `N-1` coordinates) and the phases
//! are independent and uniform on `[0, 2π)`. Population vectors are produced
//! by a product transform of `N-1` uniform draws: with `ξ_i ∈ (0, 1]`,
//!
//! ```text
//! P_J = (1 - ξ_J^(1/(N-J))) · Π_{i<J} ξ_i^(1/(N-i)),   P_N = Π_{i<N} ξ_i^(1/(N-i))
//! ```
//!
//! which telescopes so that `Σ P_k = 1` up to round-off.

use std::f64::consts::TAU;
use std::ops::Deref;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::rng::{open_unit, MIN_UNIFORM};

/// Above this dimension the running product is carried as a logarithm.
pub const LOG_SPACE_THRESHOLD: usize = 1 << 10;

/// Absolute tolerance on `Σ P_k = 1` accepted by [`PopulationVector::new`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum RpseError {
    #[error("population vector is empty")]
    Empty,
    #[error("population {index} = {value} lies outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("populations sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("dimension mismatch: {populations} populations but {phases} phases")]
    Dimension { populations: usize, phases: usize },
}

/// Normalized populations `P_k = |c_k|²` in the energy eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PopulationVector(Vec<f64>);

impl PopulationVector {
    pub fn new(p: Vec<f64>) -> Result<Self, RpseError> {
        if p.is_empty() {
            return Err(RpseError::Empty);
        }
        if let Some((index, &value)) = p.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return Err(RpseError::OutOfRange { index, value });
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(RpseError::NotNormalized(sum));
        }
        Ok(Self(p))
    }

    /// Samplers whose construction already guarantees the invariants.
    pub(crate) fn from_vec_unchecked(p: Vec<f64>) -> Self {
        Self(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `Σ P_k E_k` for a spectrum of the same length.
    pub fn expectation(&self, levels: &[f64]) -> f64 {
        self.0.iter().zip(levels).map(|(p, e)| p * e).sum()
    }
}

impl Deref for PopulationVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    populations: PopulationVector,
    phases: Vec<f64>,
}

impl PureState {
    pub fn populations(&self) -> &PopulationVector {
        &self.populations
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// `c_k = √P_k · exp(i α_k)`.
    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.populations.iter().zip(&self.phases).map(|(&p, &alpha)| Complex64::from_polar(p.sqrt(), alpha)).collect()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Applies the product transform to `N-1` uniforms in `(0, 1]`.
/// Non-positive inputs are treated as the smallest uniform draw.
pub fn simplex_from_uniforms(xi: &[f64]) -> PopulationVector {
    let n = xi.len() + 1;
    let mut p = Vec::with_capacity(n);
    if n > LOG_SPACE_THRESHOLD {
        let mut log_rest = 0.0f64;
        for (i, &x) in xi.iter().enumerate() {
            let log_t = x.max(MIN_UNIFORM).ln() / (n - 1 - i) as f64;
            p.push(-log_t.exp_m1() * log_rest.exp());
            log_rest += log_t;
        }
        p.push(log_rest.exp());
    } else {
        let mut rest = 1.0;
        for (i, &x) in xi.iter().enumerate() {
            let t = x.max(MIN_UNIFORM).powf(1.0 / (n - 1 - i) as f64);
            p.push(rest * (1.0 - t));
            rest *= t;
        }
        p.push(rest);
    }
    PopulationVector(p)
}

/// Draws a population vector uniformly from the `(N-1)`-simplex using exactly
/// `N-1` uniform draws.
pub fn sample_simplex<R: Rng + ?Sized>(n_states: usize, rng: &mut R) -> PopulationVector {
    assert!(n_states >= 1, "need at least one state");
    let xi: Vec<f64> = (0..n_states - 1).map(|_| open_unit(rng)).collect();
    simplex_from_uniforms(&xi)
}

/// Maps uniforms in `[0, 1)` to phases in `[0, 2π)`.
pub fn phases_from_uniforms(u: &[f64]) -> Vec<f64> {
    u.iter().map(|&x| (x * TAU).rem_euclid(TAU)).collect()
}

pub fn sample_phases<R: Rng + ?Sized>(n_states: usize, rng: &mut R) -> Vec<f64> {
    (0..n_states).map(|_| rng.random::<f64>() * TAU).collect()
}

pub fn assemble_state(populations: PopulationVector, phases: Vec<f64>) -> Result<PureState, RpseError> {
    if populations.len() != phases.len() {
        return Err(RpseError::Dimension { populations: populations.len(), phases: phases.len() });
    }
    Ok(PureState { populations, phases })
}

/// A full random pure state: simplex populations plus uniform phases.
pub fn sample_state<R: Rng + ?Sized>(n_states: usize, rng: &mut R) -> PureState {
    let populations = sample_simplex(n_states, rng);
    let phases = sample_phases(n_states, rng);
    PureState { populations, phases }
}

/// Density of the ensemble in the first `N-1` populations, `(N-1)!`.
/// Used for cross-checks only; the sampler is exact and needs no density.
pub fn rpse_density(p: &PopulationVector) -> f64 {
    (1..p.len()).map(|k| k as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    #[test]
    fn two_states_direct_formula() {
        let p = simplex_from_uniforms(&[0.25]);
        assert_eq!(p.as_slice(), &[0.75, 0.25]);
    }

    #[test]
    fn all_ones_collapse_to_last_state() {
        for n in [2, 5, 16, 2000] {
            let p = simplex_from_uniforms(&vec![1.0; n - 1]);
            assert!(p[..n - 1].iter().all(|&x| x == 0.0));
            assert_eq!(p[n - 1], 1.0);
        }
    }

    #[test]
    fn single_state_is_certain() {
        let mut rng = stream_rng(3, 0);
        assert_eq!(sample_simplex(1, &mut rng).as_slice(), &[1.0]);
    }

    #[test]
    fn zero_uniform_is_remapped() {
        let p = simplex_from_uniforms(&[0.0, 0.5]);
        assert!(p.iter().all(|x| x.is_finite() && *x >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_space_matches_direct_products() {
        // Same uniforms through both branches of the transform.
        let mut rng = stream_rng(11, 0);
        let n = LOG_SPACE_THRESHOLD + 1;
        let xi: Vec<f64> = (0..n - 1).map(|_| open_unit(&mut rng)).collect();
        let logged = simplex_from_uniforms(&xi);
        let mut rest = 1.0;
        for (i, &x) in xi.iter().enumerate() {
            let t = x.powf(1.0 / (n - 1 - i) as f64);
            let direct = rest * (1.0 - t);
            // `1 - t` in the direct branch cancels to ~1e-13 relative near t = 1.
            assert!((logged[i] - direct).abs() <= 1e-10 * direct.max(1e-300), "i={i}");
            rest *= t;
        }
    }

    #[test]
    fn exchange_symmetry_of_means() {
        let n = 8;
        let m = 100_000;
        let mut rng = stream_rng(5, 0);
        let mut sums = vec![0.0; n];
        let mut sq = vec![0.0; n];
        for _ in 0..m {
            let p = sample_simplex(n, &mut rng);
            for k in 0..n {
                sums[k] += p[k];
                sq[k] += p[k] * p[k];
            }
        }
        for k in 0..n {
            let mean = sums[k] / m as f64;
            let var = sq[k] / m as f64 - mean * mean;
            let se = (var / m as f64).sqrt();
            assert!((mean - 1.0 / n as f64).abs() < 5.0 * se, "k={k} mean={mean}");
        }
    }

    #[test]
    fn phases_scale_uniforms() {
        assert_eq!(phases_from_uniforms(&[0.0]), vec![0.0]);
        assert!((phases_from_uniforms(&[0.5])[0] - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn phase_symmetry_and_independence() {
        let m = 100_000;
        let mut rng = stream_rng(9, 0);
        let draws: Vec<Vec<f64>> = (0..m).map(|_| sample_phases(4, &mut rng)).collect();
        assert!(draws.iter().flatten().all(|&a| (0.0..TAU).contains(&a)));
        let mean_cos = draws.iter().map(|a| a[0].cos()).sum::<f64>() / m as f64;
        assert!(mean_cos.abs() < 3.0 / (m as f64).sqrt());

        let (x, y): (Vec<f64>, Vec<f64>) = draws.iter().map(|a| (a[0], a[1])).unzip();
        let mx = x.iter().sum::<f64>() / m as f64;
        let my = y.iter().sum::<f64>() / m as f64;
        let cov = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / m as f64;
        let vx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / m as f64;
        let vy = y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / m as f64;
        let corr = cov / (vx * vy).sqrt();
        // Standard error of a null correlation is 1/√m.
        assert!(corr.abs() < 3.0 / (m as f64).sqrt(), "corr={corr}");
    }

    #[test]
    fn basis_and_polar_states() {
        let s = assemble_state(PopulationVector::new(vec![1.0, 0.0]).unwrap(), vec![0.0, 0.0]).unwrap();
        let c = s.amplitudes();
        assert_eq!(c[0], Complex64::new(1.0, 0.0));
        assert_eq!(c[1].norm(), 0.0);

        let s =
            assemble_state(PopulationVector::new(vec![0.5, 0.5]).unwrap(), vec![0.0, std::f64::consts::PI]).unwrap();
        let c = s.amplitudes();
        assert!((c[0] - Complex64::new(0.5f64.sqrt(), 0.0)).norm() < 1e-15);
        assert!((c[1] - Complex64::new(-(0.5f64.sqrt()), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let p = PopulationVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(assemble_state(p, vec![0.0]).unwrap_err(), RpseError::Dimension { populations: 2, phases: 1 });
    }

    #[test]
    fn validation() {
        assert_eq!(PopulationVector::new(vec![]).unwrap_err(), RpseError::Empty);
        assert!(matches!(PopulationVector::new(vec![1.2, -0.2]), Err(RpseError::OutOfRange { index: 0, .. })));
        assert!(matches!(PopulationVector::new(vec![0.5, 0.4]), Err(RpseError::NotNormalized(_))));
    }

    #[test]
    fn density_is_factorial() {
        let uniform = |n: usize| PopulationVector::new(vec![1.0 / n as f64; n]).unwrap();
        assert_eq!(rpse_density(&uniform(2)), 1.0);
        assert_eq!(rpse_density(&uniform(3)), 2.0);
        assert_eq!(rpse_density(&uniform(4)), 6.0);
    }

    proptest! {
        #[test]
        fn samples_are_normalized(n in 1usize..3000, seed in any::<u64>()) {
            let mut rng = stream_rng(seed, 0);
            let p = sample_simplex(n, &mut rng);
            prop_assert_eq!(p.len(), n);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn assembled_states_have_unit_norm(n in 1usize..64, seed in any::<u64>()) {
            let mut rng = stream_rng(seed, 0);
            let s = sample_state(n, &mut rng);
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }
}
