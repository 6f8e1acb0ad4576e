use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or mismatched inputs.
    #[error("configuration error: {0}")]
    Config(String),

    /// A configuration key was given a value outside its allowed range.
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },

    /// Unknown configuration key.
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    /// An operation was applied to a client or round in the wrong state.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Fewer than two active clients remain.
    #[error("population exhausted: {active} active client(s) remain")]
    PopulationExhausted { active: usize },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("chain file error at line {line}: {reason}")]
    ChainFormat { line: usize, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Error::InvalidValue {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
