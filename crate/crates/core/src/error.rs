use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed or invalid line in one of the per-frame text files.
    #[error("{}: {message} at line {line}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid sequence {sequence}: {message}")]
    InvalidSequence { sequence: String, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("metric input is empty: {0}")]
    EmptyInput(&'static str),

    /// Any failure attributable to a tracker: wire protocol violations,
    /// crashed child processes, timeouts, numerical blow-up in a baseline.
    #[error("tracker failure: {0}")]
    Tracker(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn is_tracker_failure(&self) -> bool {
        matches!(self, Error::Tracker(_))
    }
}
