//! Error-to-exit-code mapping for the CLI.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or argument combination (exit 1).
    Usage(String),
    /// Problems with input data, configuration, or model files (exit 2).
    Data(admrisk::Error),
    /// Unexpected internal failures such as write errors (exit 3).
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn internal(context: &str, error: impl fmt::Display) -> CliError {
        CliError::Internal(format!("{context}: {error}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Data(e) => write!(f, "{e}"),
            CliError::Internal(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<admrisk::Error> for CliError {
    fn from(error: admrisk::Error) -> Self {
        match error {
            // write-side failures are internal; everything else is the
            // caller's data or configuration
            admrisk::Error::Io { ref path, .. } if !path.exists() => CliError::Data(error),
            admrisk::Error::Io { .. } => CliError::Internal(error.to_string()),
            other => CliError::Data(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
