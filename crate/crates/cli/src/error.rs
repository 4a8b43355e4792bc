use std::fmt;
use std::path::Path;

use boundarylab::Error as CoreError;

/// Failure of a command, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad config keys, invalid parameter values. Exit 1.
    Usage(String),
    /// Unreadable or malformed input files, failed writes. Exit 2.
    Io(String),
    /// Numerical breakdown or an attack that found nothing. Exit 3.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub(crate) fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        if e.is_numeric() || matches!(e, CoreError::AttackInfeasible(_)) {
            return CliError::Numeric(msg);
        }
        match e {
            CoreError::Io { .. }
            | CoreError::Parse { .. }
            | CoreError::Format(_)
            | CoreError::Serialization(_) => CliError::Io(msg),
            _ => CliError::Usage(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
