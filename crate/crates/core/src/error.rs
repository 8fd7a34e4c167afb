use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, parameter, or configuration value.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {reason}")]
    Io { path: PathBuf, reason: String },

    /// A non-finite value appeared during time stepping.
    #[error("numerical error: non-finite value at node ({i}, {j}, {k}) in step {step}")]
    NonFinite {
        step: usize,
        i: usize,
        j: usize,
        k: usize,
    },

    /// An operation was called with input violating its documented contract.
    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Io {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// Process exit code for this class of failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Config(_) | Error::Contract(_) => 3,
            Error::NonFinite { .. } => 4,
        }
    }
}
