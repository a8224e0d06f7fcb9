use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Internal inconsistency in the simulation (a bug, not a user error).
    #[error("simulation error: {0}")]
    Sim(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("trace line {line}: {msg}")]
    Trace { line: usize, msg: String },

    #[error("csv error: {0}")]
    Csv(String),

    /// A sweep member failed; `label` identifies its configuration.
    #[error("experiment #{index} ({label}) failed: {source}")]
    Experiment {
        index: usize,
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { key: key.into(), msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
