//! Batch runner for percolab experiments: configuration parsing, replica
//! execution on a worker pool, and CSV/JSON artifacts.

pub mod config;
pub mod error;
pub mod runner;

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use runner::{run_experiment, RunManifest};
