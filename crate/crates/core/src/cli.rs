//! Command-line front end.
//!
//! Options come from flags and from an optional `--config FILE` of
//! `key = value` lines. Config entries are spliced in right after the
//! subcommand, so flags given on the command line win. Booleans are written
//! `key = true`. Every run is fully determined by its options and seed.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use crate::approx::{
    entropy_rel_width_rpse, feee_approx_i_from, feee_approx_ii, mean_entropy_feee_i, mean_entropy_feee_ii,
    mean_entropy_rpse, solve_lagrange, LagrangeSolution, PinnedGroundSolution,
};
use crate::feee::{ChainSummary, Elimination, FeeeTarget};
use crate::observables::{Histogram, RunningStats};
use crate::oracle::rpse_exact_mean_entropy;
use crate::sampling::{sample_feee, sample_rpse, write_samples_csv, Collect, FeeeRunConfig, SampleSet};
use crate::spectrum::{build_spin_spectrum, identical_spins, EnergySpectrum, ShiftPolicy};
use crate::validation::{self, Level};
use crate::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "qensembles", version, about = "Random pure-state ensembles of spin systems")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a spectrum and print its derived constants as JSON.
    Spectrum(SpectrumCmd),
    /// Sample the unconstrained ensemble.
    SampleRpse(RpseCmd),
    /// Sample the fixed-energy ensemble with Metropolis–Hastings.
    SampleFeee(FeeeCmd),
    /// Evaluate the maximum-entropy approximations.
    Approx(ApproxCmd),
    /// Run the self-check suite.
    Validate(ValidateCmd),
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumSource {
    /// Number of spins; the spectrum has 2^n levels.
    #[arg(long, conflicts_with = "spectrum_file")]
    pub spins: Option<usize>,
    /// Comma-separated spin frequencies (default: all 1).
    #[arg(long, requires = "spins")]
    pub frequencies: Option<String>,
    /// Plain-text file with one eigenvalue per line.
    #[arg(long)]
    pub spectrum_file: Option<PathBuf>,
    /// Reject a spectrum file whose lowest level is not zero instead of shifting it.
    #[arg(long)]
    pub no_shift: bool,
}

#[derive(Debug, Clone, Args)]
pub struct HistogramArgs {
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Comma-separated 1-based population indices to histogram.
    #[arg(long, default_value = "1")]
    pub populations: String,
    /// Entropy histogram range `lo,hi` (default: sample min and max).
    #[arg(long)]
    pub entropy_range: Option<String>,
    /// Population histogram range `lo,hi` (default: 0 to sample max).
    #[arg(long)]
    pub pop_range: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Directory for summary.json and the histogram CSVs.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Also write every sampled population vector to samples.csv.
    #[arg(long)]
    pub save_samples: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumCmd {
    #[command(flatten)]
    pub source: SpectrumSource,
    /// Write the levels, one per line, to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RpseCmd {
    #[command(flatten)]
    pub source: SpectrumSource,
    /// Hilbert-space dimension, as an alternative to a spectrum.
    #[arg(long, conflicts_with_all = ["spins", "spectrum_file"])]
    pub states: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[command(flatten)]
    pub histograms: HistogramArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EliminationArg {
    /// Solve the two most populated states from the constraints.
    Populated,
    /// Solve the top state and the last state of the next lower level.
    Top,
}

impl From<EliminationArg> for Elimination {
    fn from(e: EliminationArg) -> Self {
        match e {
            EliminationArg::Populated => Elimination::MostPopulated,
            EliminationArg::Top => Elimination::AsGiven,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FeeeCmd {
    #[command(flatten)]
    pub source: SpectrumSource,
    /// Energy per spin (requires --spins).
    #[arg(long, conflicts_with = "energy", requires = "spins")]
    pub eps: Option<f64>,
    /// Total mean energy.
    #[arg(long)]
    pub energy: Option<f64>,
    /// Kept samples over all chains.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Burn-in steps per chain (default: max(10(N-2), 10000)).
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thinning: Option<usize>,
    #[arg(long)]
    pub proposal_scale: Option<f64>,
    /// Keep the proposal scale fixed during burn-in.
    #[arg(long)]
    pub no_adapt: bool,
    #[arg(long, value_enum, default_value_t = EliminationArg::Populated)]
    pub elimination: EliminationArg,
    #[command(flatten)]
    pub histograms: HistogramArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ApproxCmd {
    #[command(flatten)]
    pub source: SpectrumSource,
    /// Comma-separated energies per spin (requires --spins).
    #[arg(long, conflicts_with = "energy", requires = "spins")]
    pub eps: Option<String>,
    /// Comma-separated total energies.
    #[arg(long)]
    pub energy: Option<String>,
    /// Write the JSON here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateCmd {
    #[arg(long, default_value = "quick")]
    pub level: Level,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Removes `--config FILE` from `args` and splices the file's options in
/// directly after the subcommand.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, Error> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let text = arg.to_string_lossy();
        if text == "--config" {
            let path = it.next().ok_or_else(|| Error::Usage("--config needs a file".into()))?;
            config = Some(PathBuf::from(path));
        } else if let Some(path) = text.strip_prefix("--config=") {
            config = Some(PathBuf::from(path));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let text =
        fs::read_to_string(&path).map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let spliced = config_args(&text)?;
    let at = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map_or(rest.len(), |i| i + 2);
    rest.splice(at..at, spliced);
    Ok(rest)
}

/// Translates `key = value` lines into flags. `#` starts a comment.
pub fn config_args(text: &str) -> Result<Vec<OsString>, Error> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| Error::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(Error::Usage(format!("config line {}: invalid key", i + 1)));
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

/// Parses arguments (program name first) and runs the command.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> ExitCode {
    let args = match expand_config(args.into_iter().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Spectrum(c) => run_spectrum(&c),
        Command::SampleRpse(c) => run_rpse(&c),
        Command::SampleFeee(c) => run_feee(&c),
        Command::Approx(c) => run_approx(&c),
        Command::Validate(c) => run_validate(&c),
    }
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Usage(format!("{what}: cannot parse '{s}'"))))
        .collect()
}

fn parse_range(text: Option<&str>, what: &str) -> Result<Option<(f64, f64)>, Error> {
    let Some(text) = text else { return Ok(None) };
    match parse_list(text, what)?.as_slice() {
        &[lo, hi] if lo < hi => Ok(Some((lo, hi))),
        _ => Err(Error::Usage(format!("{what}: expected lo,hi with lo < hi"))),
    }
}

fn parse_indices(text: &str, n_states: usize) -> Result<Vec<usize>, Error> {
    text.split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(k) if (1..=n_states).contains(&k) => Ok(k - 1),
            _ => Err(Error::Usage(format!("--populations: '{s}' is not an index in 1..={n_states}"))),
        })
        .collect()
}

impl SpectrumSource {
    fn is_given(&self) -> bool {
        self.spins.is_some() || self.spectrum_file.is_some()
    }

    fn build(&self) -> Result<EnergySpectrum, Error> {
        if let Some(path) = &self.spectrum_file {
            let policy = if self.no_shift { ShiftPolicy::Reject } else { ShiftPolicy::AutoShift };
            return Ok(EnergySpectrum::load(path, policy)?);
        }
        let n = self.spins.ok_or_else(|| Error::Usage("give --spins or --spectrum-file".into()))?;
        Ok(match &self.frequencies {
            Some(f) => build_spin_spectrum(n, &parse_list(f, "--frequencies")?)?,
            None => identical_spins(n)?,
        })
    }
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct SpectrumReport<'a> {
    schema_version: u32,
    command: &'static str,
    n_states: usize,
    n_spins: Option<usize>,
    frequencies: Option<&'a [f64]>,
    e_star: f64,
    e_max: f64,
    s0: Option<f64>,
    f0: Option<f64>,
}

fn run_spectrum(c: &SpectrumCmd) -> Result<(), Error> {
    let spec = c.source.build()?;
    let constants = spec.constants().ok();
    if let Some(path) = &c.output {
        spec.write_text(fs::File::create(path)?)?;
    }
    write_json(
        &SpectrumReport {
            schema_version: SCHEMA_VERSION,
            command: "spectrum",
            n_states: spec.len(),
            n_spins: spec.n_spins(),
            frequencies: spec.frequencies(),
            e_star: spec.e_star(),
            e_max: spec.max_energy(),
            s0: constants.map(|c| c.s0),
            f0: constants.map(|c| c.f0),
        },
        None,
    )
}

#[derive(Debug, Serialize)]
struct Stats {
    mean: f64,
    std: f64,
    rel_width: Option<f64>,
    std_error: f64,
    n_samples: u64,
}

fn stats(values: &[f64]) -> Result<Stats, Error> {
    let acc: RunningStats = values.iter().copied().collect();
    let s = acc.finalize()?;
    Ok(Stats { mean: s.mean, std: s.std, rel_width: s.rel_width, std_error: acc.std_error()?, n_samples: s.n_samples })
}

#[derive(Debug, Serialize)]
struct PopulationReport {
    /// 1-based state index.
    index: usize,
    energy: f64,
    measured: Stats,
    approx_i_mean: Option<f64>,
    approx_ii_mean: Option<f64>,
}

fn min_max(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo < hi {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn write_histogram(
    dir: &Path,
    name: &str,
    values: impl IntoIterator<Item = f64>,
    range: (f64, f64),
    bins: usize,
) -> Result<(), Error> {
    let h = Histogram::from_values(values, range.0, range.1, bins)?;
    h.write_csv(fs::File::create(dir.join(name))?)?;
    Ok(())
}

/// Histograms of entropy, entropy per spin and the requested populations,
/// plus the optional samples file.
fn write_sample_files(
    set: &SampleSet,
    n_spins: Option<usize>,
    h: &HistogramArgs,
    out: &OutputArgs,
) -> Result<(), Error> {
    let dir = out.out_dir.as_path();
    let entropy_range =
        parse_range(h.entropy_range.as_deref(), "--entropy-range")?.unwrap_or_else(|| min_max(&set.entropies));
    write_histogram(dir, "entropy_hist.csv", set.entropies.iter().copied(), entropy_range, h.bins)?;
    if let Some(n) = n_spins {
        let n = n as f64;
        let range = (entropy_range.0 / n, entropy_range.1 / n);
        write_histogram(dir, "entropy_per_spin_hist.csv", set.entropies.iter().map(|s| s / n), range, h.bins)?;
    }
    let pop_range = parse_range(h.pop_range.as_deref(), "--pop-range")?;
    for (k, values) in &set.populations {
        let range = pop_range.unwrap_or_else(|| (0.0, min_max(values).1.max(f64::MIN_POSITIVE)));
        write_histogram(dir, &format!("population_{}_hist.csv", k + 1), values.iter().copied(), range, h.bins)?;
    }
    if out.save_samples {
        write_samples_csv(&set.full, set.n_states, fs::File::create(dir.join("samples.csv"))?)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RpseReport {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    chains: usize,
    n_states: usize,
    n_spins: Option<usize>,
    entropy: Stats,
    entropy_per_spin: Option<Stats>,
    populations: Vec<PopulationReport>,
    reference: RpseReference,
}

#[derive(Debug, Serialize)]
struct RpseReference {
    exact_mean_entropy: f64,
    approx_mean_entropy: f64,
    approx_entropy_rel_width: f64,
    population_mean: f64,
}

fn check_counts(samples: usize, chains: usize) -> Result<(), Error> {
    if samples < 2 {
        return Err(Error::Usage("--samples must be at least 2".into()));
    }
    if chains == 0 {
        return Err(Error::Usage("--chains must be at least 1".into()));
    }
    Ok(())
}

fn per_spin(set: &SampleSet, n_spins: Option<usize>) -> Result<Option<Stats>, Error> {
    n_spins.map(|n| stats(&set.entropies.iter().map(|s| s / n as f64).collect::<Vec<_>>())).transpose()
}

fn run_rpse(c: &RpseCmd) -> Result<(), Error> {
    check_counts(c.samples, c.output.chains)?;
    let (n_states, n_spins, levels) = match c.states {
        Some(n) if n >= 1 => (n, None, None),
        Some(_) => return Err(Error::Usage("--states must be at least 1".into())),
        None if c.source.is_given() => {
            let spec = c.source.build()?;
            (spec.len(), spec.n_spins(), Some(spec.eigenvalues().to_vec()))
        }
        None => return Err(Error::Usage("give --states, --spins or --spectrum-file".into())),
    };
    let indices = parse_indices(&c.histograms.populations, n_states)?;
    fs::create_dir_all(&c.output.out_dir)?;
    info!("sampling {} uniform-simplex points in dimension {n_states}", c.samples);
    let collect = Collect::populations(indices.clone()).with_full(c.output.save_samples);
    let set = sample_rpse(n_states, c.samples, c.output.seed, c.output.chains, &collect);
    write_sample_files(&set, n_spins, &c.histograms, &c.output)?;

    let mean = 1.0 / n_states as f64;
    let populations = set
        .populations
        .iter()
        .map(|(k, values)| {
            Ok(PopulationReport {
                index: k + 1,
                energy: levels.as_ref().map_or(f64::NAN, |l| l[*k]),
                measured: stats(values)?,
                approx_i_mean: Some(mean),
                approx_ii_mean: None,
            })
        })
        .collect::<Result<_, Error>>()?;
    let report = RpseReport {
        schema_version: SCHEMA_VERSION,
        command: "sample-rpse",
        seed: c.output.seed,
        chains: c.output.chains,
        n_states,
        n_spins,
        entropy: stats(&set.entropies)?,
        entropy_per_spin: per_spin(&set, n_spins)?,
        populations,
        reference: RpseReference {
            exact_mean_entropy: rpse_exact_mean_entropy(n_states),
            approx_mean_entropy: mean_entropy_rpse(n_states),
            approx_entropy_rel_width: entropy_rel_width_rpse(n_states),
            population_mean: mean,
        },
    };
    write_json(&report, Some(&c.output.out_dir.join("summary.json")))
}

#[derive(Debug, Serialize)]
struct FeeeReport {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    config: FeeeRunConfig,
    n_states: usize,
    n_spins: Option<usize>,
    energy: f64,
    energy_per_spin: Option<f64>,
    e_star: f64,
    e_max: f64,
    entropy: Stats,
    entropy_per_spin: Option<Stats>,
    populations: Vec<PopulationReport>,
    acceptance_rate: f64,
    chain_summaries: Vec<ChainSummary>,
    multipliers: LagrangeSolution,
    predictions: Predictions,
}

#[derive(Debug, Serialize)]
struct Predictions {
    approx_i_mean_entropy: Option<f64>,
    approx_ii_mean_entropy: Option<f64>,
    approx_i_mean_entropy_per_spin: Option<f64>,
    approx_ii_mean_entropy_per_spin: Option<f64>,
    /// Exact mean entropy of the unconstrained ensemble, an upper reference.
    rpse_exact_mean_entropy: f64,
}

fn predictions(spec: &EnergySpectrum, energy: f64) -> Predictions {
    let i = mean_entropy_feee_i(spec, energy).ok();
    let ii = mean_entropy_feee_ii(spec, energy).ok();
    let n = spec.n_spins().map(|n| n as f64);
    Predictions {
        approx_i_mean_entropy: i,
        approx_ii_mean_entropy: ii,
        approx_i_mean_entropy_per_spin: i.zip(n).map(|(s, n)| s / n),
        approx_ii_mean_entropy_per_spin: ii.zip(n).map(|(s, n)| s / n),
        rpse_exact_mean_entropy: rpse_exact_mean_entropy(spec.len()),
    }
}

fn energy_of(spec: &EnergySpectrum, eps: Option<f64>, energy: Option<f64>) -> Result<f64, Error> {
    match (eps, energy) {
        (Some(eps), _) => Ok(eps * spec.n_spins().ok_or_else(|| Error::Usage("--eps needs --spins".into()))? as f64),
        (None, Some(e)) => Ok(e),
        (None, None) => Err(Error::Usage("give --eps or --energy".into())),
    }
}

fn run_feee(c: &FeeeCmd) -> Result<(), Error> {
    check_counts(c.samples, c.output.chains)?;
    let spec = c.source.build()?;
    let energy = energy_of(&spec, c.eps, c.energy)?;
    let target = FeeeTarget::new(spec.clone(), energy)?;
    let n_states = spec.len();
    let indices = parse_indices(&c.histograms.populations, n_states)?;

    let mut config = FeeeRunConfig::new(n_states, c.samples);
    config.chains = c.output.chains;
    config.adapt = !c.no_adapt;
    config.elimination = c.elimination.into();
    if let Some(b) = c.burn_in {
        config.burn_in = b;
    }
    if let Some(t) = c.thinning {
        config.thinning = t;
    }
    if let Some(s) = c.proposal_scale {
        config.proposal_scale = s;
    }
    fs::create_dir_all(&c.output.out_dir)?;
    info!("running {} chain(s) for {} kept samples at E = {energy}", config.chains, config.kept);
    let collect = Collect::populations(indices).with_full(c.output.save_samples);
    let (set, summaries) = sample_feee(&target, &config, c.output.seed, &collect)?;
    write_sample_files(&set, spec.n_spins(), &c.histograms, &c.output)?;

    let multipliers = solve_lagrange(&spec, energy)?;
    let approx_i = feee_approx_i_from(&spec, &multipliers).means();
    let approx_ii = feee_approx_ii(&spec, energy).ok().map(|d| d.means());
    let levels = spec.eigenvalues();
    let populations = set
        .populations
        .iter()
        .map(|(k, values)| {
            Ok(PopulationReport {
                index: k + 1,
                energy: levels[*k],
                measured: stats(values)?,
                approx_i_mean: Some(approx_i[*k]),
                approx_ii_mean: approx_ii.as_ref().map(|m| m[*k]),
            })
        })
        .collect::<Result<_, Error>>()?;
    let kept: usize = summaries.iter().map(|s| s.kept).sum();
    let acceptance_rate = summaries.iter().map(|s| s.acceptance_rate * s.kept as f64).sum::<f64>() / kept.max(1) as f64;
    let report = FeeeReport {
        schema_version: SCHEMA_VERSION,
        command: "sample-feee",
        seed: c.output.seed,
        config,
        n_states,
        n_spins: spec.n_spins(),
        energy,
        energy_per_spin: spec.n_spins().map(|n| energy / n as f64),
        e_star: spec.e_star(),
        e_max: spec.max_energy(),
        entropy: stats(&set.entropies)?,
        entropy_per_spin: per_spin(&set, spec.n_spins())?,
        populations,
        acceptance_rate,
        chain_summaries: summaries,
        multipliers,
        predictions: predictions(&spec, energy),
    };
    write_json(&report, Some(&c.output.out_dir.join("summary.json")))
}

#[derive(Debug, Serialize)]
struct ApproxPoint {
    energy: f64,
    energy_per_spin: Option<f64>,
    multipliers: Option<LagrangeSolution>,
    pinned_ground: Option<PinnedGroundSolution>,
    predictions: Predictions,
}

#[derive(Debug, Serialize)]
struct ApproxReport {
    schema_version: u32,
    command: &'static str,
    n_states: usize,
    n_spins: Option<usize>,
    e_star: f64,
    e_max: f64,
    rpse_approx_mean_entropy: f64,
    points: Vec<ApproxPoint>,
}

fn run_approx(c: &ApproxCmd) -> Result<(), Error> {
    let spec = c.source.build()?;
    let n = spec.n_spins();
    let energies: Vec<f64> = match (&c.eps, &c.energy) {
        (Some(eps), _) => {
            let n = n.ok_or_else(|| Error::Usage("--eps needs --spins".into()))? as f64;
            parse_list(eps, "--eps")?.into_iter().map(|e| e * n).collect()
        }
        (None, Some(e)) => parse_list(e, "--energy")?,
        (None, None) => return Err(Error::Usage("give --eps or --energy".into())),
    };
    let points = energies
        .into_iter()
        .map(|energy| {
            let multipliers = solve_lagrange(&spec, energy)?;
            let pinned = PinnedGroundSolution::new(&spec, energy).ok().filter(|p| p.a1 >= 0.0);
            Ok(ApproxPoint {
                energy,
                energy_per_spin: n.map(|n| energy / n as f64),
                multipliers: Some(multipliers),
                pinned_ground: pinned,
                predictions: predictions(&spec, energy),
            })
        })
        .collect::<Result<_, Error>>()?;
    let report = ApproxReport {
        schema_version: SCHEMA_VERSION,
        command: "approx",
        n_states: spec.len(),
        n_spins: n,
        e_star: spec.e_star(),
        e_max: spec.max_energy(),
        rpse_approx_mean_entropy: mean_entropy_rpse(spec.len()),
        points,
    };
    write_json(&report, c.output.as_deref())
}

fn run_validate(c: &ValidateCmd) -> Result<(), Error> {
    let report = validation::run(c.level, c.seed)?;
    for check in &report.checks {
        println!("{check}");
    }
    if let Some(path) = &c.output {
        write_json(&report, Some(path))?;
    }
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        println!("all {} checks passed", report.checks.len());
        Ok(())
    } else {
        Err(Error::Validation(failed.join(", ")))
    }
}
