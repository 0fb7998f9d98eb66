//! Experiment harness for multi-task stacked hourglass networks: config
//! resolution, dataset loading, training jobs, sweeps and the derived tables
//! and curves.

pub mod analysis;
pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod run;

pub use cli::{Cli, Command, ExperimentArgs};
pub use commands::{run, sweep, SweepResult};
pub use error::{CliError, Result};
