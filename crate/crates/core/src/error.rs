//! Error types shared across the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by tensor ops, layers, training, and file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape {shape:?} implies {expected} elements, got {found}")]
    ShapeData {
        shape: Vec<usize>,
        expected: usize,
        found: usize,
    },

    #[error("cannot reshape {from:?} ({from_len} elements) into {to:?} ({to_len} elements)")]
    Reshape {
        from: Vec<usize>,
        from_len: usize,
        to: Vec<usize>,
        to_len: usize,
    },

    /// Incompatible operand shapes; `detail` names both shapes.
    #[error("{op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// Invalid argument or configuration for an operation.
    #[error("{op}: {detail}")]
    Invalid { op: &'static str, detail: String },

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("checkpoint {path:?}: {detail}")]
    Checkpoint { path: PathBuf, detail: String },

    #[error(transparent)]
    Dataset(#[from] DatasetError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Invalid {
            op,
            detail: detail.into(),
        }
    }
}

/// Errors from dataset parsing and the distorted-dataset store.
///
/// Every malformed input maps to a variant here; parsers never panic on
/// truncated or corrupt bytes.
#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path:?}: bad magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{path:?}: truncated: need {need} bytes for {what}, have {have}")]
    Truncated {
        path: PathBuf,
        what: &'static str,
        need: usize,
        have: usize,
    },

    #[error("{path:?}: {len} bytes is not a whole number of {record}-byte records")]
    RaggedFile {
        path: PathBuf,
        len: usize,
        record: usize,
    },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("label {label} out of range for {num_classes} classes (record {index})")]
    BadLabel {
        label: u8,
        num_classes: usize,
        index: usize,
    },

    #[error("{path:?}: checksum mismatch for {what}: manifest says {expected:#010x}, payload hashes to {found:#010x}")]
    ChecksumMismatch {
        path: PathBuf,
        what: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("{path:?}: manifest: {detail}")]
    BadManifest { path: PathBuf, detail: String },

    #[error("{path:?}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}
