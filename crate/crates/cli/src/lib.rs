//! Batch front end for `tailprofile`: each subcommand reads a JSON config
//! (plus flag overrides), writes CSV tables and JSON reports to an output
//! directory, and records a manifest of inputs, seed and config hash.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, run_fit, run_link, run_pca, run_simulate};
pub use config::{Command, LinkSource, Overrides, RunConfig, SimKind};

use tailprofile::ErrorKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] tailprofile::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for data problems, 4 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Input | ErrorKind::Io => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            },
        }
    }
}
