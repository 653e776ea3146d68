//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by image operations, model evaluation, and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shape or channel-count mismatch between operands.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A numeric parameter is outside its valid range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// File I/O failure, with the offending path.
    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// PNG encode/decode failure.
    #[error("image codec error on {path:?}: {message}")]
    Codec { path: PathBuf, message: String },

    /// Malformed or incompatible checkpoint file.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Malformed configuration file or value.
    #[error("config error: {0}")]
    Config(String),

    /// Dataset directory problems (missing files, unpaired names).
    #[error("dataset error: {0}")]
    Dataset(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
