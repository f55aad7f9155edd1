use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or infeasible configuration. `key` is the offending key path.
    #[error("configuration error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// Scenario document could not be parsed.
    #[error("scenario parse error: {0}")]
    Parse(String),

    /// No usable load reports for a frequency group.
    #[error("missing load data for group {group}")]
    MissingData { group: usize },

    /// Argument outside the domain of a radio formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// SINR requested for a UE without any assigned RBs.
    #[error("SINR undefined: empty RB assignment")]
    UndefinedSinr,

    /// A runtime invariant was violated; the run must abort.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("failed to write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status for this error: 1 for configuration problems, 2 for
    /// runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parse(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
