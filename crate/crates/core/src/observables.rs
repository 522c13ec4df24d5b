//! Entropy, streaming moments and histograms over sampled ensembles.
//!
//! Accumulators are mergeable values: run one per chain, merge at the end.
//! Standard deviations use the sample convention (divide by `n - 1`).

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

/// Populations below this are treated as exactly zero in the entropy sum.
pub const ENTROPY_FLOOR: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum ObservablesError {
    #[error("need at least {needed} values, have {have}")]
    InsufficientData { needed: u64, have: u64 },
    #[error("invalid histogram range [{lo}, {hi}) with {bins} bins")]
    Range { lo: f64, hi: f64, bins: usize },
    #[error("histograms have different binning")]
    Incompatible,
    #[error("degenerate data: {0}")]
    Degenerate(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Natural-log Shannon entropy `-Σ p ln p` with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    let s: f64 = p.iter().filter(|&&x| x >= ENTROPY_FLOOR).fold(0.0, |acc, &x| acc - x * x.ln());
    s.max(0.0)
}

/// Welford accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunningStats {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for RunningStats {
    fn default() -> Self {
        Self { count: 0, mean: 0.0, m2: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY }
    }
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let n = n_a + n_b;
        let delta = other.mean - self.mean;
        self.mean += delta * n_b / n;
        self.m2 += other.m2 + delta * delta * n_a * n_b / n;
        self.count += other.count;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    pub fn variance(&self) -> Result<f64, ObservablesError> {
        if self.count < 2 {
            return Err(ObservablesError::InsufficientData { needed: 2, have: self.count });
        }
        Ok((self.m2 / (self.count - 1) as f64).max(0.0))
    }

    pub fn std(&self) -> Result<f64, ObservablesError> {
        self.variance().map(f64::sqrt)
    }

    pub fn std_error(&self) -> Result<f64, ObservablesError> {
        Ok(self.std()? / (self.count as f64).sqrt())
    }

    pub fn finalize(&self) -> Result<Summary, ObservablesError> {
        let std = self.std()?;
        Ok(Summary {
            mean: self.mean,
            std,
            rel_width: if self.mean != 0.0 { Some(std / self.mean) } else { None },
            n_samples: self.count,
        })
    }
}

impl Extend<f64> for RunningStats {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.push(x);
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        s.extend(iter);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    /// `std / mean`; absent when the mean is zero.
    pub rel_width: Option<f64>,
    pub n_samples: u64,
}

/// Fixed-range histogram: bins are `[lo_i, hi_i)` except the last, which is closed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub out_of_range: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
    pub density: f64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self, ObservablesError> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || bins == 0 {
            return Err(ObservablesError::Range { lo, hi, bins });
        }
        Ok(Self { lo, hi, counts: vec![0; bins], out_of_range: 0 })
    }

    pub fn from_values<I: IntoIterator<Item = f64>>(
        values: I,
        lo: f64,
        hi: f64,
        bins: usize,
    ) -> Result<Self, ObservablesError> {
        let mut h = Self::new(lo, hi, bins)?;
        for v in values {
            h.push(v);
        }
        Ok(h)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = self.bin_width();
        let hi = if i + 1 == self.bins() { self.hi } else { self.lo + (i + 1) as f64 * w };
        (self.lo + i as f64 * w, hi)
    }

    pub fn bin_centre(&self, i: usize) -> f64 {
        let (a, b) = self.bin_edges(i);
        0.5 * (a + b)
    }

    pub fn bin_index(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let i = ((x - self.lo) / self.bin_width()).floor() as usize;
        Some(i.min(self.bins() - 1))
    }

    pub fn push(&mut self, x: f64) {
        match self.bin_index(x) {
            Some(i) => self.counts[i] += 1,
            None => self.out_of_range += 1,
        }
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.in_range() + self.out_of_range
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<(), ObservablesError> {
        if self.lo != other.lo || self.hi != other.hi || self.bins() != other.bins() {
            return Err(ObservablesError::Incompatible);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.out_of_range += other.out_of_range;
        Ok(())
    }

    /// `count / (total · width)` per bin; total includes out-of-range values.
    pub fn densities(&self) -> Vec<f64> {
        let total = self.total();
        let w = self.bin_width();
        self.counts.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / (total as f64 * w) }).collect()
    }

    /// Bin probabilities `count / total`.
    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    pub fn normalize(&self) -> Vec<DensityRow> {
        self.densities()
            .into_iter()
            .enumerate()
            .map(|(i, density)| {
                let (bin_lo, bin_hi) = self.bin_edges(i);
                DensityRow { bin_lo, bin_hi, count: self.counts[i], density }
            })
            .collect()
    }

    /// CSV with header `bin_lo,bin_hi,count,density`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), ObservablesError> {
        let mut w = csv::Writer::from_writer(writer);
        for row in self.normalize() {
            w.serialize(row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianFit {
    pub mu: f64,
    pub sigma: f64,
}

/// Moment-matched Gaussian from binned counts (bin centres).
pub fn gaussian_fit(h: &Histogram) -> Result<GaussianFit, ObservablesError> {
    let nonempty = h.counts.iter().filter(|&&c| c > 0).count();
    if nonempty < 3 {
        return Err(ObservablesError::Degenerate("fewer than 3 nonempty bins"));
    }
    let mut stats = RunningStats::new();
    for (i, &c) in h.counts.iter().enumerate() {
        let x = h.bin_centre(i);
        let mut one = RunningStats { count: c, mean: x, m2: 0.0, min: x, max: x };
        if c == 0 {
            one = RunningStats::new();
        }
        stats.merge(&one);
    }
    Ok(GaussianFit { mu: stats.mean, sigma: stats.std()? })
}

/// Moment-matched Gaussian from the raw values behind a histogram.
pub fn gaussian_fit_values(stats: &RunningStats) -> Result<GaussianFit, ObservablesError> {
    let sigma = stats.std()?;
    if sigma == 0.0 {
        return Err(ObservablesError::Degenerate("zero spread"));
    }
    Ok(GaussianFit { mu: stats.mean, sigma })
}

/// One-sample Kolmogorov–Smirnov statistic. Sorts `values` in place.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &mut [f64], cdf: F) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Half the L1 distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Largest `|count - expected| / √expected` over bins with a positive expectation.
pub fn max_pull(counts: &[u64], expected: &[f64]) -> f64 {
    counts
        .iter()
        .zip(expected)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&c, &e)| (c as f64 - e).abs() / e.sqrt())
        .fold(0.0, f64::max)
}
