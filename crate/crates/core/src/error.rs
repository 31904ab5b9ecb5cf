// SPDX-License-Identifier: Apache-2.0
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("layer `{layer}`: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        layer: String,
        expected: usize,
        actual: usize,
    },

    #[error("duplicate layer name `{0}`")]
    DuplicateLayer(String),

    #[error("invalid layer shape: {0}")]
    InvalidShape(String),

    #[error("unsupported group size {0} (expected one of 1, 2, 4, 8, 16, 32, 64)")]
    InvalidGroupSize(usize),

    #[error("truncated payload: {0}")]
    Truncated(String),

    #[error(
        "group {group}: index has {expected} non-zero columns but payload holds {actual} bytes"
    )]
    IndexPayloadMismatch {
        group: usize,
        expected: usize,
        actual: usize,
    },

    #[error("not a compressed weight container (bad magic)")]
    BadMagic,

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),

    #[error("layer kind {kind} cannot be mapped on {su}")]
    IncompatibleLayer { su: String, kind: String },

    #[error("group size {group_size} does not fit the lane width of {su}")]
    GroupingMismatch { su: String, group_size: usize },

    #[error("compression ratio must be positive, got {0}")]
    InvalidCompressionRatio(f64),

    #[error("oracle failed: {0}")]
    Oracle(String),

    #[error("oracle returned a non-finite metric ({0})")]
    NonFiniteMetric(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("strategy: {0}")]
    Strategy(String),

    #[error("config: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
