//! Energy spectra of non-interacting spin-1/2 systems and user-supplied level lists.
//!
//! Energies are dimensionless multiples of the reference quantum `ħω0`. Every
//! spectrum is sorted ascending with its ground state at zero; degenerate
//! levels are kept as repeated entries because ensemble densities are indexed
//! by states, not by levels.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use log::warn;
use serde::Serialize;
use thiserror::Error;

/// Default cap on the number of spins enumerated by [`build_spin_spectrum`].
pub const DEFAULT_MAX_SPINS: usize = 24;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("a spectrum needs at least two levels, got {0}")]
    TooFewLevels(usize),
    #[error("expected {expected} frequencies, got {got}")]
    FrequencyCount { expected: usize, got: usize },
    #[error("spin frequency {index} must be positive and finite, got {value}")]
    BadFrequency { index: usize, value: f64 },
    #[error("{n} spins exceed the capacity cap of {cap} (2^n levels)")]
    Capacity { n: usize, cap: usize },
    #[error("need at least one spin")]
    NoSpins,
    #[error("eigenvalue {index} is not finite: {value}")]
    NonFinite { index: usize, value: f64 },
    #[error("excited level {index} has zero energy; S0 and F0 are undefined for a degenerate ground state")]
    DegenerateGround { index: usize },
    #[error("lowest eigenvalue is {0}, expected 0 (use ShiftPolicy::AutoShift to move the origin)")]
    NonZeroGround(f64),
    #[error("line {line}: cannot parse {text:?} as an eigenvalue")]
    Parse { line: usize, text: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What to do with a user-supplied spectrum whose lowest level is not zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftPolicy {
    /// Subtract the minimum from every level and log a warning.
    #[default]
    AutoShift,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySpectrum {
    eigenvalues: Vec<f64>,
    n_spins: Option<usize>,
    frequencies: Option<Vec<f64>>,
}

/// Derived constants shared by the approximations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumConstants {
    /// Energy of the equal-population state, the mean eigenvalue.
    pub e_star: f64,
    pub e_max: f64,
    /// Sum of inverse excited energies.
    pub s0: f64,
    /// Sum of `ln(E_k) / E_k` over excited states.
    pub f0: f64,
}

/// Enumerates all `2^n` Zeeman levels `Σ ω_k m_k` with `m_k = ±1/2`, shifted so the
/// ground state sits at zero. Uses [`DEFAULT_MAX_SPINS`] as the capacity cap.
pub fn build_spin_spectrum(n: usize, frequencies: &[f64]) -> Result<EnergySpectrum, SpectrumError> {
    build_spin_spectrum_capped(n, frequencies, DEFAULT_MAX_SPINS)
}

pub fn build_spin_spectrum_capped(
    n: usize,
    frequencies: &[f64],
    max_spins: usize,
) -> Result<EnergySpectrum, SpectrumError> {
    if n == 0 {
        return Err(SpectrumError::NoSpins);
    }
    if frequencies.len() != n {
        return Err(SpectrumError::FrequencyCount { expected: n, got: frequencies.len() });
    }
    if let Some((index, &value)) = frequencies.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
        return Err(SpectrumError::BadFrequency { index, value });
    }
    if n > max_spins || n >= usize::BITS as usize {
        return Err(SpectrumError::Capacity { n, cap: max_spins });
    }

    // Bit k of the configuration index set means spin k is up. Measured from the
    // all-down configuration, a level is the sum of the up-spin frequencies.
    let mut eigenvalues: Vec<f64> = (0..1usize << n)
        .map(|config| {
            frequencies.iter().enumerate().filter(|(k, _)| config >> k & 1 == 1).fold(0.0, |acc, (_, w)| acc + w)
        })
        .collect();
    // Stable sort keeps enumeration order among ties.
    eigenvalues.sort_by(f64::total_cmp);

    Ok(EnergySpectrum { eigenvalues, n_spins: Some(n), frequencies: Some(frequencies.to_vec()) })
}

/// `n` spins sharing the reference frequency, the configuration used throughout
/// the figures: level `k` appears `C(n, k)` times.
pub fn identical_spins(n: usize) -> Result<EnergySpectrum, SpectrumError> {
    build_spin_spectrum(n, &vec![1.0; n])
}

impl EnergySpectrum {
    /// Builds a spectrum from arbitrary eigenvalues, sorting them and applying
    /// `policy` when the lowest level is not zero.
    pub fn from_eigenvalues(mut levels: Vec<f64>, policy: ShiftPolicy) -> Result<Self, SpectrumError> {
        if levels.len() < 2 {
            return Err(SpectrumError::TooFewLevels(levels.len()));
        }
        if let Some((index, &value)) = levels.iter().enumerate().find(|(_, e)| !e.is_finite()) {
            return Err(SpectrumError::NonFinite { index, value });
        }
        levels.sort_by(f64::total_cmp);
        let ground = levels[0];
        if ground != 0.0 {
            match policy {
                ShiftPolicy::Reject => return Err(SpectrumError::NonZeroGround(ground)),
                ShiftPolicy::AutoShift => {
                    warn!("shifting spectrum by {ground} so the ground state sits at zero");
                    for e in &mut levels {
                        *e -= ground;
                    }
                }
            }
        }
        Ok(Self { eigenvalues: levels, n_spins: None, frequencies: None })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Hilbert-space dimension `N`.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn n_spins(&self) -> Option<usize> {
        self.n_spins
    }

    pub fn frequencies(&self) -> Option<&[f64]> {
        self.frequencies.as_deref()
    }

    pub fn max_energy(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    pub fn e_star(&self) -> f64 {
        self.eigenvalues.iter().sum::<f64>() / self.len() as f64
    }

    pub fn constants(&self) -> Result<SpectrumConstants, SpectrumError> {
        constants(self)
    }

    /// Reads one eigenvalue per line. Blank lines and `#` comments are skipped.
    pub fn read_text<R: BufRead>(reader: R, policy: ShiftPolicy) -> Result<Self, SpectrumError> {
        let mut levels = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let text = line.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let value =
                text.parse::<f64>().map_err(|_| SpectrumError::Parse { line: i + 1, text: text.to_string() })?;
            levels.push(value);
        }
        Self::from_eigenvalues(levels, policy)
    }

    pub fn load(path: impl AsRef<Path>, policy: ShiftPolicy) -> Result<Self, SpectrumError> {
        let file = std::fs::File::open(path)?;
        Self::read_text(std::io::BufReader::new(file), policy)
    }

    /// One eigenvalue per line, ascending, in shortest round-trip decimal form.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.len() * 4);
        for e in &self.eigenvalues {
            let _ = writeln!(out, "{e}");
        }
        out
    }

    pub fn write_text<W: Write>(&self, mut writer: W) -> Result<(), SpectrumError> {
        writer.write_all(self.to_text().as_bytes())?;
        Ok(())
    }
}

/// `E*`, `E_N`, `S0` and `F0`; the ground state is excluded from the two sums.
pub fn constants(spec: &EnergySpectrum) -> Result<SpectrumConstants, SpectrumError> {
    let levels = spec.eigenvalues();
    let mut s0 = 0.0;
    let mut f0 = 0.0;
    for (index, &e) in levels.iter().enumerate().skip(1) {
        if e <= 0.0 {
            return Err(SpectrumError::DegenerateGround { index });
        }
        s0 += 1.0 / e;
        f0 += e.ln() / e;
    }
    Ok(SpectrumConstants { e_star: spec.e_star(), e_max: spec.max_energy(), s0, f0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn two_identical_spins() {
        let s = build_spin_spectrum(2, &[1.0, 1.0]).unwrap();
        assert_eq!(s.eigenvalues(), &[0.0, 1.0, 1.0, 2.0]);
        assert_eq!(s.n_spins(), Some(2));
    }

    #[test]
    fn single_spin_is_two_level() {
        let s = build_spin_spectrum(1, &[1.0]).unwrap();
        assert_eq!(s.eigenvalues(), &[0.0, 1.0]);
    }

    #[test]
    fn three_spins_binomial_degeneracy() {
        let s = identical_spins(3).unwrap();
        assert_eq!(s.eigenvalues(), &[0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn degeneracies_follow_binomial_coefficients() {
        for n in 1..=10u64 {
            let s = identical_spins(n as usize).unwrap();
            for k in 0..=n {
                let count = s.eigenvalues().iter().filter(|&&e| e == k as f64).count() as u64;
                assert_eq!(count, binomial(n, k), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn unequal_frequencies() {
        let s = build_spin_spectrum(2, &[1.0, 2.5]).unwrap();
        assert_eq!(s.eigenvalues(), &[0.0, 1.0, 2.5, 3.5]);
    }

    #[test]
    fn capacity_cap() {
        assert!(matches!(build_spin_spectrum_capped(5, &[1.0; 5], 4), Err(SpectrumError::Capacity { n: 5, cap: 4 })));
        assert!(matches!(build_spin_spectrum(25, &[1.0; 25]), Err(SpectrumError::Capacity { .. })));
    }

    #[test]
    fn rejects_bad_frequencies() {
        assert!(matches!(build_spin_spectrum(2, &[1.0, 0.0]), Err(SpectrumError::BadFrequency { index: 1, .. })));
        assert!(matches!(build_spin_spectrum(2, &[1.0]), Err(SpectrumError::FrequencyCount { .. })));
        assert!(matches!(build_spin_spectrum(0, &[]), Err(SpectrumError::NoSpins)));
    }

    #[test]
    fn constants_of_two_spins() {
        let c = identical_spins(2).unwrap().constants().unwrap();
        assert_eq!(c.e_star, 1.0);
        assert_eq!(c.e_max, 2.0);
        // 1/1 + 1/1 + 1/2
        assert!((c.s0 - 2.5).abs() < 1e-15);
        // ln1/1 + ln1/1 + ln2/2
        assert!((c.f0 - std::f64::consts::LN_2 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn constants_of_two_level_system() {
        let c = identical_spins(1).unwrap().constants().unwrap();
        assert_eq!(c.e_star, 0.5);
        assert_eq!(c.s0, 1.0);
        assert_eq!(c.f0, 0.0);
    }

    #[test]
    fn degenerate_ground_state_has_no_s0() {
        let s = EnergySpectrum::from_eigenvalues(vec![0.0, 0.0, 1.0], ShiftPolicy::Reject).unwrap();
        assert!(matches!(s.constants(), Err(SpectrumError::DegenerateGround { index: 1 })));
    }

    #[test]
    fn user_spectrum_shift_policy() {
        let s = EnergySpectrum::from_eigenvalues(vec![3.0, 1.0, 2.0], ShiftPolicy::AutoShift).unwrap();
        assert_eq!(s.eigenvalues(), &[0.0, 1.0, 2.0]);
        assert!(matches!(
            EnergySpectrum::from_eigenvalues(vec![1.0, 2.0], ShiftPolicy::Reject),
            Err(SpectrumError::NonZeroGround(_))
        ));
        assert!(matches!(
            EnergySpectrum::from_eigenvalues(vec![0.0], ShiftPolicy::Reject),
            Err(SpectrumError::TooFewLevels(1))
        ));
    }

    #[test]
    fn text_round_trip() {
        let s = build_spin_spectrum(3, &[0.3, 1.1, 2.7]).unwrap();
        let text = s.to_text();
        let back = EnergySpectrum::read_text(text.as_bytes(), ShiftPolicy::Reject).unwrap();
        assert_eq!(back.eigenvalues(), s.eigenvalues());
    }

    #[test]
    fn text_parse_errors_and_comments() {
        let ok = EnergySpectrum::read_text("# levels\n0\n\n1.5 # excited\n".as_bytes(), ShiftPolicy::Reject).unwrap();
        assert_eq!(ok.eigenvalues(), &[0.0, 1.5]);
        let err = EnergySpectrum::read_text("0\nabc\n".as_bytes(), ShiftPolicy::Reject).unwrap_err();
        assert!(matches!(err, SpectrumError::Parse { line: 2, .. }));
    }

    #[test]
    fn rebuilding_is_identical() {
        let w = [0.7, 1.3, 0.2, 2.0];
        assert_eq!(build_spin_spectrum(4, &w).unwrap(), build_spin_spectrum(4, &w).unwrap());
    }

    #[test]
    fn e_star_is_mean() {
        let s = build_spin_spectrum(5, &[0.4, 1.0, 1.7, 0.9, 3.1]).unwrap();
        let mean = s.eigenvalues().iter().sum::<f64>() / 32.0;
        // Each spin is up in half the configurations.
        let analytic = (0.4 + 1.0 + 1.7 + 0.9 + 3.1) / 2.0;
        assert!((s.e_star() - mean).abs() <= 1e-12 * mean);
        assert!((s.e_star() - analytic).abs() <= 1e-12 * analytic);
    }
}
