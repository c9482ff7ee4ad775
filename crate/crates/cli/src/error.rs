//! CLI error type with process exit codes.

use nroy_core::CoreError;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, malformed config, inconsistent inputs. Exit code 2.
    #[error("{0}")]
    Validation(String),

    /// The filter or sampler found nothing plausible. Exit code 3.
    #[error("{0}")]
    EmptyPlausibleSet(String),

    /// Everything else. Exit code 1.
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::EmptyPlausibleSet(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match &e {
            CoreError::EmptyPlausibleSet { .. } | CoreError::NoCompletedRuns { .. } => {
                CliError::EmptyPlausibleSet(e.to_string())
            }
            CoreError::InvalidArgument(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::OutOfDomain { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}
