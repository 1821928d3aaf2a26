//! Command-line front end for the transducer simulator: TOML scenario
//! configs, named presets reproducing the reference protocols, and runners
//! that turn either into trace CSVs, summary JSON, and sweep tables.

pub mod config;
pub mod presets;
pub mod runner;

use thiserror::Error;
use transducer_core::CoreError;

/// Top-level failure modes, split by exit code: bad input versus a
/// simulation that went numerically wrong.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// Process exit code: 1 for validation and I/O problems, 2 for
    /// numerical failures during integration.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Numerical { .. } => CliError::Numerical(err.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}
