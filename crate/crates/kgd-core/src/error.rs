use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by this crate.
#[derive(Debug, Error)]
pub enum KgdError {
    /// A caller-supplied value violates a documented precondition.
    #[error("input error: {0}")]
    Input(String),

    /// A numerical routine produced a non-finite or otherwise unusable result.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// File I/O failed; the path is included for context.
    #[error("io error: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, KgdError>;
