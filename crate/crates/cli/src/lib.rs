//! Experiment harness for the `gtmcmc` sampler: configuration parsing,
//! single, replicated and sequence runs, and the oracle validation suites.

pub mod commands;
pub mod config;
pub mod validate;

use gtmcmc::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const OTHER: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const ALL_WEIGHTS_ZERO: u8 = 3;
    pub const DEGENERATE_COVARIANCE: u8 = 4;
    pub const MAX_STAGES: u8 = 5;
    pub const VALIDATION: u8 = 6;
}

/// A failed command: message plus exit code.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: exit::CONFIG,
            message: message.into(),
        }
    }

    pub fn other(message: impl Into<String>) -> Self {
        Self {
            code: exit::OTHER,
            message: message.into(),
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => exit::CONFIG,
        Error::AllWeightsZero(_) => exit::ALL_WEIGHTS_ZERO,
        Error::DegenerateCovariance(_) => exit::DEGENERATE_COVARIANCE,
        Error::MaxStagesExceeded(_) => exit::MAX_STAGES,
        _ => exit::OTHER,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::other(format!("i/o error: {e}"))
    }
}
