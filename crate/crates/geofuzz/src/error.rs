//! Crate-wide error type.

use std::path::Path;

/// Errors surfaced by generation, geometry estimation, fuzzing, and the
/// experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// An input vector does not fit the program it is applied to.
    #[error("input error: {0}")]
    Input(String),
    /// A graph or trace violates a structural requirement.
    #[error("structural error: {0}")]
    Structural(String),
    /// A linear solve or similar numeric step failed.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// An operation was invoked on state that cannot support it.
    #[error("state error: {0}")]
    State(String),
    /// Persisted data is internally inconsistent.
    #[error("data error: {0}")]
    Data(String),
    /// A serialized document does not match the expected format.
    #[error("format error: {0}")]
    Format(String),
    /// Filesystem failure, tagged with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an I/O error with the path it occurred on.
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
