//! Configuration, experiment runs and artifact writing for the `mmw-snr`
//! command.

pub mod config;
mod error;
pub mod run;
pub mod selfcheck;

pub use config::{ExperimentConfig, OUTPUT_DIR_ENV};
pub use error::CliError;
pub use run::{run_sounder, run_sweep, run_trace, RunReport};
