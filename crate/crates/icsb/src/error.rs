//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an argument contract (bad dimension, node out of
    /// range, invalid probability, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An exact computation was requested on an instance too large for it.
    /// The message names the cheaper alternative where one exists.
    #[error("instance too large: {0}")]
    Capacity(String),

    /// A file failed to parse; `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Load {
        path: String,
        line: usize,
        message: String,
    },

    /// Experiment configuration is missing or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
