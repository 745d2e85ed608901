use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("IDX format error in {path}: field `{field}` at byte offset {offset}: {message}")]
    Format {
        path: PathBuf,
        field: &'static str,
        offset: u64,
        message: String,
    },

    #[error("infeasible partition for node {node}: {message}")]
    InfeasiblePartition { node: usize, message: String },

    #[error("invalid state: {0}")]
    State(String),

    #[error("invalid value for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
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
