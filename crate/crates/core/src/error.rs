use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the engine.
///
/// `Domain` covers bad inputs (parameters outside their range, malformed
/// measure specs, mismatched grids). `Consistency` signals that a structural
/// property the theory guarantees was violated numerically, which points at a
/// bug rather than at the caller.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {left} intervals on [0, {left_len}] vs {right} intervals on [0, {right_len}]")]
    GridMismatch {
        left: usize,
        left_len: f64,
        right: usize,
        right_len: f64,
    },

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors that indicate an implementation bug.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Consistency(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
