use std::io;
use std::path::PathBuf;

use sparse_lqr_core::Error as CoreError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{0}")]
    Input(String),

    #[error("{path}: {source}")]
    InvalidFile {
        path: PathBuf,
        #[source]
        source: CoreError,
    },

    #[error(transparent)]
    Numerical(CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Parse { .. } | CliError::Io { .. } | CliError::Input(_) | CliError::InvalidFile { .. } => {
                EXIT_INPUT
            }
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<CoreError> for CliError {
    /// Bad configuration values are usage errors, a bad starting gain is an
    /// input error, everything else is a numerical failure.
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidConfig(_) | CoreError::BadRadius(_) | CoreError::WrongKind => {
                CliError::Usage(e.to_string())
            }
            CoreError::InitNotStabilizing { .. }
            | CoreError::DimensionMismatch { .. }
            | CoreError::PartitionMismatch { .. }
            | CoreError::InvalidWeights(_)
            | CoreError::NonFinite(_)
            | CoreError::NonSquare { .. }
            | CoreError::Empty(_) => CliError::Input(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
