//! Error types shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input document (JSON syntax, bad UTF-8, wrong types).
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse {
        line: usize,
        column: usize,
        msg: String,
    },

    /// Structurally valid input that violates a model/platform constraint.
    #[error("validation error: {0}")]
    Validation(String),

    /// No design satisfies the resource budgets.
    #[error("infeasible design: {0}")]
    Infeasible(String),

    /// An operation was called outside its domain (zero divisor, bad range).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code: 2 validation/parse, 3 infeasible, 4 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Validation(_) | Error::Domain(_) => 2,
            Error::Infeasible(_) => 3,
            Error::Io { .. } => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
