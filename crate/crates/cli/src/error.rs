use std::fmt;
use std::process::ExitCode;

use spillover_core::Error;

/// Command failure, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config keys or generator parameters (exit 2).
    Usage(String),
    /// Inputs that parse but break an invariant or do not fit together (exit 3).
    Validation(String),
    /// Work refused because `n` exceeds the enumeration bound (exit 4).
    Capability(String),
    /// I/O and anything else (exit 1).
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Other(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Capability(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Capability(m) => write!(f, "{m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidParameter(_) | Error::InvalidProbability(_) => CliError::Usage(msg),
            Error::InvalidStructure(_)
            | Error::DimensionMismatch(_)
            | Error::Parse { .. }
            | Error::Transform(_)
            | Error::Adversarial(_) => CliError::Validation(msg),
            Error::BoundExceeded { .. } => CliError::Capability(msg),
            Error::Io(_) | Error::Csv(_) => CliError::Other(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
