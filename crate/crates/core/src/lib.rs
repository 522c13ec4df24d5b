//! Random pure-state ensembles of spin systems.
//!
//! Two ensembles of pure states are sampled and analysed through their
//! energy-basis populations:
//!
//! * the random pure-state ensemble ([`rpse`]), uniform on the unit sphere,
//!   whose populations are uniform on the probability simplex;
//! * the fixed-expectation-energy ensemble ([`feee`]), the same measure
//!   restricted to a fixed mean energy, sampled by Metropolis–Hastings.
//!
//! [`approx`] provides the maximum-entropy product approximations of both
//! ensembles, [`observables`] the entropy, histogram and summary statistics,
//! [`oracle`] independent reference computations, and [`validation`] a
//! self-check suite combining them. [`cli`] is the command-line front end.

// `!(x > y)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod cli;
pub mod feee;
pub mod observables;
pub mod oracle;
pub mod rng;
pub mod rpse;
pub mod sampling;
pub mod spectrum;
pub mod validation;

pub use approx::{
    feee_approx_i, feee_approx_ii, mean_entropy_feee_i, mean_entropy_feee_ii, mean_entropy_rpse, solve_lagrange,
    ApproxDistribution, ApproxError, LagrangeSolution,
};
pub use feee::{ChainConfig, Elimination, FeeeChain, FeeeError, FeeeTarget, FreePopulations};
pub use observables::{shannon_entropy, Histogram, ObservablesError, RunningStats, Summary};
pub use oracle::OracleError;
pub use rng::stream_rng;
pub use rpse::{sample_simplex, sample_state, PopulationVector, PureState, RpseError};
pub use sampling::{sample_feee, sample_rpse, Collect, FeeeRunConfig, SampleSet};
pub use spectrum::{build_spin_spectrum, identical_spins, EnergySpectrum, ShiftPolicy, SpectrumError};

/// Any error raised by the library, tagged with the module it came from.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("spectrum: {0}")]
    Spectrum(#[from] SpectrumError),
    #[error("rpse: {0}")]
    Rpse(#[from] RpseError),
    #[error("feee: {0}")]
    Feee(#[from] FeeeError),
    #[error("approx: {0}")]
    Approx(#[from] ApproxError),
    #[error("observables: {0}")]
    Observables(#[from] ObservablesError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("usage: {0}")]
    Usage(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl Error {
    /// Process exit status: 1 for usage errors, 2 for numeric or validation failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Usage(_) => 1,
            _ => 2,
        }
    }
}
