use std::path::PathBuf;

use thiserror::Error;

use crate::numerics::NumericsError;

/// Errors raised outside the tensor kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("singular transition: {0}")]
    Singular(String),
    #[error("impossible transition: {0}")]
    Impossible(String),
    #[error("training diverged at step {step}: {message}")]
    Training { step: usize, message: String },
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("evaluation protocol error: {0}")]
    Protocol(String),
    #[error("undefined metric: {0}")]
    Undefined(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad inputs or settings rather than by a run going wrong.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Self::Training { .. } | Self::Numerics(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
