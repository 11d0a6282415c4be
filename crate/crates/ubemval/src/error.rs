//! Command failures and their exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration or flags; exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Missing or malformed input data; exit code 3.
    #[error("data error: {0}")]
    Data(String),
    /// Output could not be written; exit code 4.
    #[error("output error: {0}")]
    Output(String),
    /// A failure that no input should trigger; exit code 4.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Output(_) | CliError::Internal(_) => 4,
        }
    }

    /// Invalid parameters are configuration errors; anything else raised by
    /// the core while reading a dataset is a data error.
    pub fn from_core(e: ubemval_core::Error) -> Self {
        match e {
            ubemval_core::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}
