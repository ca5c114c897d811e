//! Error types shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Grid shapes disagree (field vs. layer, field vs. field, ...).
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Non-finite values or a numerically invalid quantity.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A detector region falls outside the grid or overlaps another.
    #[error("detector layout error: {0}")]
    Layout(String),

    /// Architecture notation failed to parse; `position` is a byte offset
    /// into the input string.
    #[error("notation parse error at byte {position}: {message}")]
    Notation { position: usize, message: String },

    /// Notation parsed but is inconsistent with the dataset class count.
    #[error("architecture validation error: {0}")]
    Architecture(String),

    /// A dataset file is malformed; `offset` is the byte offset at which
    /// the problem was detected.
    #[error("data format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    /// Invalid configuration (bad values, missing files, inconsistent options).
    #[error("config error: {0}")]
    Config(String),

    /// An operation was called in the wrong order (e.g. adjoint without capture).
    #[error("state error: {0}")]
    State(String),

    /// Checkpoint file is corrupt or has an unsupported version.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for CLI front ends: 1 usage/config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Notation { .. } | Error::Architecture(_) | Error::Config(_) => 1,
            Error::Format { .. } | Error::Io { .. } | Error::Checkpoint(_) => 2,
            Error::Numeric(_) => 3,
            Error::Shape(_) | Error::Layout(_) | Error::State(_) => 1,
        }
    }
}
