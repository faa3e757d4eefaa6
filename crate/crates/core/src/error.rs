use std::path::PathBuf;

use crate::tensor::Shape;

/// Every failure the engine surfaces. Nothing is clamped silently.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid shape {0:?}: all extents must be positive and the element count addressable")]
    InvalidShape([usize; 4]),
    #[error("data length {len} does not match shape {shape} ({expected} elements)")]
    DataLength { shape: Shape, len: usize, expected: usize },
    #[error("shape mismatch in {op}: {left} vs {right}")]
    ShapeMismatch {
        op: &'static str,
        left: Shape,
        right: Shape,
    },
    #[error("{op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("core must be divisible by 4 (got {0})")]
    InvalidCore(usize),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("weight archive: {0}")]
    Archive(String),
    #[error("weight archive entry `{name}`: {reason}")]
    ArchiveEntry { name: String, reason: String },
    #[error("image: {0}")]
    Image(String),
    #[error("config file line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(op: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
