use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("dataset error for scene `{id}`: {reason}")]
    Dataset { id: String, reason: String },

    #[error("invalid scene spec: {0}")]
    Spec(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("rank error: {0}")]
    Rank(String),

    #[error("ill-conditioned system: {0}")]
    Conditioning(String),

    #[error("under-determined fit: {have} pairs for {need} coefficients")]
    Underdetermined { have: usize, need: usize },

    #[error("radar cloud is empty")]
    NoRadar,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
