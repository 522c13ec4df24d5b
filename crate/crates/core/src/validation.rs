//! Self-check suite behind `qensembles validate`.
//!
//! Every check compares a library result against an independent reference
//! (direct determinants, brute-force scans, exact integrals, rejection
//! sampling) and records the measured discrepancy next to its tolerance.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::approx::{mean_entropy_feee_ii, mean_entropy_feee_ii_spectral, solve_lagrange, PinnedGroundSolution};
use crate::feee::FeeeTarget;
use crate::observables::{ks_statistic, total_variation, Histogram, RunningStats};
use crate::oracle::{
    det_rank1_update, det_rankk_update, feee_metric_det, feee_rejection_sample, lagrange_scan_z,
    rpse_exact_mean_entropy, rpse_marginal_cdf, FourStateQuadrature, SmallMatrix,
};
use crate::rng::stream_rng;
use crate::sampling::{sample_feee, sample_rpse, Collect, FeeeRunConfig};
use crate::spectrum::{build_spin_spectrum, identical_spins, EnergySpectrum};
use crate::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Quick,
    Full,
}

impl Level {
    fn samples(self) -> usize {
        match self {
            Level::Quick => 20_000,
            Level::Full => 100_000,
        }
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            other => Err(format!("unknown level '{other}' (expected quick or full)")),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Quick => "quick",
            Level::Full => "full",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `measured < tolerance`.
    pub fn below(name: &str, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: measured < tolerance, measured, tolerance, detail: detail.into() }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<32} measured {:.3e} tolerance {:.3e}  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub level: Level,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn random_matrix(n: usize, rng: &mut impl Rng) -> Result<SmallMatrix, Error> {
    Ok(SmallMatrix::from_fn(n, |i, j| rng.random::<f64>() * 2.0 - 1.0 + if i == j { 2.0 } else { 0.0 })?)
}

fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

/// A random spin spectrum with `2..=max_spins` spins and frequencies in `[0.5, 2)`.
pub fn random_spin_spectrum(max_spins: usize, rng: &mut impl Rng) -> Result<EnergySpectrum, Error> {
    let n = rng.random_range(2..=max_spins);
    let freqs: Vec<f64> = (0..n).map(|_| 0.5 + 1.5 * rng.random::<f64>()).collect();
    Ok(build_spin_spectrum(n, &freqs)?)
}

pub fn determinant_lemmas(seed: u64) -> Result<Vec<Check>, Error> {
    let mut rng = stream_rng(seed, 101);
    let (mut worst1, mut worstk) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let a = random_matrix(8, &mut rng)?;
        let (u, v) = (random_vec(8, &mut rng), random_vec(8, &mut rng));
        let direct = a.plus_outer(std::slice::from_ref(&u), std::slice::from_ref(&v))?.det();
        worst1 = worst1.max(rel(det_rank1_update(&a, &u, &v)?, direct));
        let cols = vec![random_vec(8, &mut rng), random_vec(8, &mut rng)];
        let direct = a.plus_outer(&cols, &cols)?.det();
        worstk = worstk.max(rel(det_rankk_update(&a, &cols)?, direct));
    }
    Ok(vec![
        Check::below("rank-1 determinant lemma", worst1, 1e-10, "100 random 8x8 instances"),
        Check::below("rank-k determinant lemma", worstk, 1e-10, "100 random 8x8, k=2"),
    ])
}

pub fn metric_determinants(seed: u64) -> Result<Vec<Check>, Error> {
    let mut rng = stream_rng(seed, 102);
    let targets =
        [FeeeTarget::new(identical_spins(2)?, 1.0)?, FeeeTarget::new(build_spin_spectrum(3, &[0.8, 1.0, 1.3])?, 1.2)?];
    let mut checks = Vec::new();
    for t in &targets {
        let (mut worst, mut chain, mut points) = (0.0f64, 0.0f64, 0);
        while points < 20 {
            let q: Vec<f64> = (0..t.n_free()).map(|_| rng.random::<f64>() * 1.5 / t.n_states() as f64).collect();
            let (lo, hi) = t.eliminated(&q);
            if lo <= 1e-3 || hi <= 1e-3 || q.iter().any(|&x| x <= 1e-3) {
                continue;
            }
            let m = feee_metric_det(&q, t)?;
            worst = worst.max(m.relative_discrepancy());
            chain = chain.max(m.chain_discrepancy());
            points += 1;
        }
        let n = t.n_states();
        checks.push(Check::below(
            &format!("metric determinant N={n}"),
            worst,
            1e-8,
            "direct vs closed form, 20 points",
        ));
        checks.push(Check::below(
            &format!("metric-to-density chain N={n}"),
            chain,
            1e-8,
            "with phase block vs bracket",
        ));
    }
    Ok(checks)
}

pub fn lagrange(seed: u64) -> Result<Vec<Check>, Error> {
    let spec = identical_spins(2)?;
    let sol = solve_lagrange(&spec, spec.e_star())?;
    let at_estar = (sol.lambda - 4.0).abs().max(sol.mu.abs());

    let mut rng = stream_rng(seed, 103);
    let (mut residual, mut z_gap) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let spec = random_spin_spectrum(6, &mut rng)?;
        let energy = spec.max_energy() * (0.02 + 0.96 * rng.random::<f64>());
        let sol = solve_lagrange(&spec, energy)?;
        residual = residual.max(sol.residual_norm);
        if sol.z.is_finite() {
            let z_scan = lagrange_scan_z(spec.eigenvalues(), energy).unwrap_or(f64::NAN);
            z_gap = z_gap.max(rel(sol.z, z_scan));
        }
    }
    Ok(vec![
        Check::below("multipliers at E*", at_estar, 1e-9, "(0,1,1,2): (lambda, mu) = (4, 0)"),
        Check::below("multiplier residuals", residual, 1e-10, "20 random spectra, n <= 6"),
        Check::below("multiplier vs dense scan", z_gap, 1e-10, "relative gap in z"),
    ])
}

pub fn approximation_ii(seed: u64) -> Result<Vec<Check>, Error> {
    let mut rng = stream_rng(seed, 104);
    let (mut residual, mut identity) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let spec = random_spin_spectrum(6, &mut rng)?;
        let s0 = spec.constants()?.s0;
        let e_limit = (spec.len() - 1) as f64 / s0;
        let energy = e_limit * (0.01 + 0.98 * rng.random::<f64>());
        let sol = PinnedGroundSolution::new(&spec, energy)?;
        residual = residual.max(sol.residuals(&spec, energy).max_abs());
        let direct = mean_entropy_feee_ii(&spec, energy)?;
        let spectral = mean_entropy_feee_ii_spectral(&spec, energy)?;
        identity = identity.max((direct - spectral).abs());
    }
    Ok(vec![
        Check::below("pinned-ground stationarity", residual, 1e-12, "20 random spectra in the valid regime"),
        Check::below("entropy sum vs spectral form", identity, 1e-12, "absolute difference"),
    ])
}

pub fn quadrature() -> Result<Vec<Check>, Error> {
    let t = FeeeTarget::new(identical_spins(2)?, 1.0)?;
    let table = FourStateQuadrature::new(&t)?.marginal(0, 0.0, 0.5, 30)?;
    let cdf = |x: f64| 7.5 * 2f64.sqrt() * (2.0 / 3.0 * x.powf(1.5) - 0.8 * x.powf(2.5));
    let worst = table
        .mass
        .iter()
        .enumerate()
        .map(|(i, m)| (m - (cdf((i + 1) as f64 / 60.0) - cdf(i as f64 / 60.0))).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        Check::below("quadrature normalization", (table.total_mass() - 1.0).abs(), 1e-6, "N=4, E=1"),
        Check::below("quadrature vs closed marginal", worst, 1e-10, "ground population, 30 bins"),
    ])
}

pub fn rpse(level: Level, seed: u64) -> Result<Vec<Check>, Error> {
    let m = level.samples();
    let critical = 1.63 / (m as f64).sqrt();
    let mut checks = Vec::new();
    for spins in 2..=4 {
        let n = 1 << spins;
        let set = sample_rpse(n, m, seed, 1, &Collect::populations([0]));
        let mut values = set.populations[0].1.clone();
        let d = ks_statistic(&mut values, |x| rpse_marginal_cdf(n, x));
        checks.push(Check::below(&format!("RPSE marginal KS n={spins}"), d, critical, "vs Beta(1, N-1)"));
    }
    let mut worst_z = 0.0f64;
    for spins in 2..=10 {
        let n = 1usize << spins;
        let stats: RunningStats =
            sample_rpse(n, m / 4, seed, 1, &Collect::entropy_only()).entropies.into_iter().collect();
        worst_z = worst_z.max((stats.mean - rpse_exact_mean_entropy(n)).abs() / stats.std_error()?);
    }
    checks.push(Check::below("RPSE mean entropy", worst_z, 4.0, "max |z| over n = 2..10 vs H_N - 1"));
    Ok(checks)
}

fn population_probabilities(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Vec<f64>, Error> {
    Ok(Histogram::from_values(values.iter().copied(), lo, hi, bins)?.probabilities())
}

pub fn feee_agreement(level: Level, seed: u64) -> Result<Vec<Check>, Error> {
    let m = level.samples();
    let bins = 30;
    let t4 = FeeeTarget::new(identical_spins(2)?, 1.0)?;
    let exact = FourStateQuadrature::new(&t4)?.marginal(0, 0.0, 0.5, bins)?.mass;
    let (mh, _) = sample_feee(&t4, &FeeeRunConfig::new(4, m), seed, &Collect::populations([0]))?;
    let mh = population_probabilities(&mh.populations[0].1, 0.0, 0.5, bins)?;
    let (rej, _) = feee_rejection_sample(&t4, m, &mut stream_rng(seed, 105))?;
    let rej = population_probabilities(&rej.iter().map(|p| p[0]).collect::<Vec<_>>(), 0.0, 0.5, bins)?;
    let worst4 = total_variation(&mh, &exact).max(total_variation(&rej, &exact)).max(total_variation(&mh, &rej));

    let t8 = FeeeTarget::new(identical_spins(3)?, 1.0)?;
    let (mh, _) = sample_feee(&t8, &FeeeRunConfig::new(8, m), seed, &Collect::populations([0]))?;
    let mh = population_probabilities(&mh.populations[0].1, 0.0, 1.0, bins)?;
    let (rej, _) = feee_rejection_sample(&t8, m, &mut stream_rng(seed, 106))?;
    let rej = population_probabilities(&rej.iter().map(|p| p[0]).collect::<Vec<_>>(), 0.0, 1.0, bins)?;
    Ok(vec![
        Check::below("FEEE three-way N=4", worst4, 0.05, "max pairwise TV, quadrature/rejection/chain"),
        Check::below("FEEE chain vs rejection N=8", total_variation(&mh, &rej), 0.05, "TV of ground marginal"),
    ])
}

/// Runs the suite. `quick` uses 2e4 samples per sampler check, `full` 1e5.
pub fn run(level: Level, seed: u64) -> Result<Report, Error> {
    let mut checks = Vec::new();
    checks.extend(determinant_lemmas(seed)?);
    checks.extend(metric_determinants(seed)?);
    checks.extend(lagrange(seed)?);
    checks.extend(approximation_ii(seed)?);
    checks.extend(quadrature()?);
    checks.extend(rpse(level, seed)?);
    checks.extend(feee_agreement(level, seed)?);
    let passed = checks.iter().all(|c| c.passed);
    Ok(Report { schema_version: SCHEMA_VERSION, level, seed, passed, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_parsing() {
        assert_eq!("quick".parse::<Level>().unwrap(), Level::Quick);
        assert_eq!("full".parse::<Level>().unwrap(), Level::Full);
        assert!("medium".parse::<Level>().is_err());
    }

    #[test]
    fn deterministic_checks_pass() {
        for check in determinant_lemmas(0)
            .unwrap()
            .into_iter()
            .chain(metric_determinants(0).unwrap())
            .chain(lagrange(0).unwrap())
            .chain(approximation_ii(0).unwrap())
            .chain(quadrature().unwrap())
        {
            assert!(check.passed, "{check}");
        }
    }
}
