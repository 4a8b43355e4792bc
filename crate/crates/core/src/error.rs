use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("inconsistent input: {0}")]
    Consistency(String),

    #[error("sampler stalled after {proposals} proposals (acceptance rate {acceptance_rate:.3e})")]
    SamplerStalled {
        proposals: u64,
        acceptance_rate: f64,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("ill-conditioned system: {0}; try a larger regularization lambda")]
    IllConditioned(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("attack infeasible: {0}")]
    AttackInfeasible(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by numerical breakdown rather than bad input or I/O.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Numeric(_)
                | Error::IllConditioned(_)
                | Error::TrainingDiverged { .. }
                | Error::SamplerStalled { .. }
        )
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
