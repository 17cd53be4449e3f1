//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied parameter violates its contract.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// A vector or matrix dimension does not match the expected shape.
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A batch row has the wrong length.
    #[error("shape mismatch in batch row {row}: expected {expected}, got {got}")]
    BatchRowMismatch {
        row: usize,
        expected: usize,
        got: usize,
    },

    /// A label lies outside `[0, classes)`.
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    /// A class index lies outside `[0, classes)`.
    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },

    /// A value that must be finite is NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// File does not start with the expected magic bytes.
    #[error("{path}: bad magic (not a {expected} file)")]
    BadMagic { path: PathBuf, expected: &'static str },

    /// File carries an unsupported format version.
    #[error("{path}: unsupported version {found} (expected {expected})")]
    BadVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    /// File ends before the named section is complete.
    #[error("{path}: truncated file, missing {section}")]
    Truncated { path: PathBuf, section: &'static str },

    /// Stored prototype norms disagree with the recomputed ones.
    #[error("{path}: stored norm for class {class} does not match recomputed value")]
    NormMismatch { path: PathBuf, class: usize },

    /// Underlying I/O failure.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
