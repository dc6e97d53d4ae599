use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent hyperparameters or layer wiring.
    #[error("configuration error: {0}")]
    Config(String),
    /// Input data with the wrong shape or content for the operation.
    #[error("input error: {0}")]
    Input(String),
    /// A rule of the train/threshold protocol was broken, e.g. an
    /// autoencoder was handed a disengaged training sample.
    #[error("protocol error: {0}")]
    Protocol(String),
    /// Malformed file contents.
    #[error("format error: {0}")]
    Format(String),
    /// API misuse, such as calling backward before forward.
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
