//! Experiment runner: configuration, datasets and the end-to-end pipeline
//! behind the `qae-ids` binary.

pub mod config;
pub mod dataset;
pub mod error;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use pipeline::{run_experiment, MetricsRecord, RunReport};
