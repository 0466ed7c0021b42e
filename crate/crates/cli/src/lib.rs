//! Experiment orchestration for the `quorum` command-line tool.

pub mod analysis;
pub mod bundle;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod scenario;

pub use error::{CliError, CliResult};
