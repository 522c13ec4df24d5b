//! Multi-chain drivers that turn the samplers into collected observables.
//!
//! Chain `c` of a run with seed `s` draws from `stream_rng(s, c + 1)` when more
//! than one chain is requested and from `stream_rng(s, 0)` otherwise. Chains
//! run in parallel and are merged in chain order, so results depend only on
//! the seed and the chain count.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::feee::{ChainConfig, ChainSummary, Elimination, FeeeChain, FeeeError, FeeeTarget};
use crate::observables::shannon_entropy;
use crate::rng::{stream_rng, StreamRng};
use crate::rpse::{sample_simplex, PopulationVector};

/// Generator for chain `chain` (0-based) out of `chains`.
pub fn chain_rng(seed: u64, chain: usize, chains: usize) -> StreamRng {
    if chains <= 1 {
        stream_rng(seed, 0)
    } else {
        stream_rng(seed, chain as u64 + 1)
    }
}

/// Splits `total` as evenly as possible, earlier chains taking the remainder.
pub fn split_counts(total: usize, chains: usize) -> Vec<usize> {
    let chains = chains.max(1);
    (0..chains).map(|c| total / chains + usize::from(c < total % chains)).collect()
}

/// What to keep from each sample besides its entropy.
#[derive(Debug, Clone, Default)]
pub struct Collect {
    /// Zero-based population indices whose values are recorded.
    pub populations: Vec<usize>,
    /// Keep every full population vector.
    pub full: bool,
}

impl Collect {
    pub fn entropy_only() -> Self {
        Self::default()
    }

    pub fn populations(indices: impl IntoIterator<Item = usize>) -> Self {
        Self { populations: indices.into_iter().collect(), full: false }
    }

    pub fn with_full(mut self, full: bool) -> Self {
        self.full = full;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub n_states: usize,
    pub entropies: Vec<f64>,
    /// `(index, values)` for each requested population, in request order.
    pub populations: Vec<(usize, Vec<f64>)>,
    pub full: Vec<PopulationVector>,
}

impl SampleSet {
    fn new(n_states: usize, collect: &Collect, capacity: usize) -> Self {
        Self {
            n_states,
            entropies: Vec::with_capacity(capacity),
            populations: collect.populations.iter().map(|&k| (k, Vec::with_capacity(capacity))).collect(),
            full: Vec::new(),
        }
    }

    fn observe(&mut self, p: PopulationVector, keep_full: bool) {
        self.entropies.push(shannon_entropy(&p));
        for (k, values) in &mut self.populations {
            values.push(p[*k]);
        }
        if keep_full {
            self.full.push(p);
        }
    }

    fn append(&mut self, other: SampleSet) {
        self.entropies.extend(other.entropies);
        for ((_, mine), (_, theirs)) in self.populations.iter_mut().zip(other.populations) {
            mine.extend(theirs);
        }
        self.full.extend(other.full);
    }

    pub fn len(&self) -> usize {
        self.entropies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entropies.is_empty()
    }

    pub fn population(&self, index: usize) -> Option<&[f64]> {
        self.populations.iter().find(|(k, _)| *k == index).map(|(_, v)| v.as_slice())
    }
}

fn merge(parts: Vec<SampleSet>, n_states: usize, collect: &Collect) -> SampleSet {
    let mut out = SampleSet::new(n_states, collect, 0);
    for part in parts {
        out.append(part);
    }
    out
}

/// Uniform-simplex samples of an `n_states`-level system.
pub fn sample_rpse(n_states: usize, samples: usize, seed: u64, chains: usize, collect: &Collect) -> SampleSet {
    let counts = split_counts(samples, chains);
    let parts: Vec<SampleSet> = counts
        .par_iter()
        .enumerate()
        .map(|(c, &count)| {
            let mut rng = chain_rng(seed, c, counts.len());
            let mut set = SampleSet::new(n_states, collect, count);
            for _ in 0..count {
                set.observe(sample_simplex(n_states, &mut rng), collect.full);
            }
            set
        })
        .collect();
    merge(parts, n_states, collect)
}

/// Settings of a multi-chain FEEE run; `kept` counts samples over all chains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeeeRunConfig {
    pub kept: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub proposal_scale: f64,
    pub adapt: bool,
    pub elimination: Elimination,
    pub chains: usize,
}

impl FeeeRunConfig {
    pub fn new(n_states: usize, kept: usize) -> Self {
        let base = ChainConfig::for_kept_samples(n_states, kept);
        Self {
            kept,
            burn_in: base.burn_in,
            thinning: base.thinning,
            proposal_scale: base.proposal_scale,
            adapt: base.adapt,
            elimination: base.elimination,
            chains: 1,
        }
    }

    pub fn chain_config(&self, kept: usize) -> ChainConfig {
        ChainConfig {
            steps: self.burn_in + kept * self.thinning,
            burn_in: self.burn_in,
            thinning: self.thinning,
            proposal_scale: self.proposal_scale,
            adapt: self.adapt,
            elimination: self.elimination,
        }
    }
}

/// Runs `config.chains` independent chains and merges their samples in chain order.
pub fn sample_feee(
    target: &FeeeTarget,
    config: &FeeeRunConfig,
    seed: u64,
    collect: &Collect,
) -> Result<(SampleSet, Vec<ChainSummary>), FeeeError> {
    let counts = split_counts(config.kept, config.chains);
    let n_states = target.n_states();
    let parts: Vec<(SampleSet, ChainSummary)> = counts
        .par_iter()
        .enumerate()
        .map(|(c, &count)| {
            let rng = chain_rng(seed, c, counts.len());
            let mut chain = FeeeChain::new(target, config.chain_config(count), rng)?;
            let mut set = SampleSet::new(n_states, collect, count);
            for p in chain.by_ref() {
                set.observe(p?, collect.full);
            }
            Ok((set, chain.summary()))
        })
        .collect::<Result<_, FeeeError>>()?;
    let summaries = parts.iter().map(|(_, s)| *s).collect();
    let set = merge(parts.into_iter().map(|(s, _)| s).collect(), n_states, collect);
    Ok((set, summaries))
}

/// One row per sample, header `p1,...,pN`.
pub fn write_samples_csv<W: Write>(samples: &[PopulationVector], n_states: usize, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((1..=n_states).map(|k| format!("p{k}")))?;
    for p in samples {
        w.write_record(p.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
