//! Config-driven experiment runner around `evoinc_core`.

pub mod config;
pub mod error;
pub mod expr;
pub mod run;
pub mod suites;

pub use config::{load, Experiment, ExperimentConfig, Overrides};
pub use error::{CliError, CliResult};
pub use run::{run, RunOutcome, Status};
