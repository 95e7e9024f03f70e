//! Experiment runner behind the `mepf` command-line tool.

pub mod checks;
pub mod config;
pub mod experiment;
pub mod plot;

use thiserror::Error;

pub use checks::{run_checks, CheckOutcome};
pub use config::{parse_algorithms, DistSpec, ExperimentConfig};
pub use experiment::{
    read_csv, run_estimator, run_experiment, summarize, trial_seed, write_csv, AlgorithmSummary,
    Experiment, ExperimentSummary, TrialRecord, CSV_HEADER,
};
pub use plot::{emit_plot_data, Axis};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("cannot plot: {0}")]
    MixedAxes(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 1 for bad configuration, 3 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::InvalidConfig(_) | CliError::MixedAxes(_) => 1,
            CliError::Io(_) => 3,
        }
    }
}
