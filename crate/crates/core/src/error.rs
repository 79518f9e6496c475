use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator.
///
/// The split between validation-class and runtime-class errors drives the
/// CLI exit status (1 and 2 respectively).
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value violates its contract.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A caller broke a sequencing or state contract (out-of-order step, stale state).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("cannot read config file {path}: {source}")]
    ConfigFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse config file {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    /// A p-value file line could not be interpreted.
    #[error("{path}: line {line}: {message}")]
    Ingest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("replication {replication} (seed {seed:#018x}) panicked: {message}")]
    ReplicationPanic {
        replication: u64,
        seed: u64,
        message: String,
    },

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failing run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::ConfigFile { .. }
                | Error::ConfigParse { .. }
                | Error::Ingest { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
