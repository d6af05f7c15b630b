//! File formats, experiment configuration and the reproducible experiment
//! driver behind the `bats` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;

pub use commands::{run, Command, Output};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
