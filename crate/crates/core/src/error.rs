use std::path::PathBuf;

use crate::dataset::Digest;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// `record` is 1-based; readers report the source line instead.
    #[error("mixed schema: record {record} {detail}")]
    MixedSchema { record: usize, detail: String },

    #[error("record {record}: {field} is empty")]
    EmptyField { record: usize, field: &'static str },

    #[error("record {record}: {detail}")]
    InvalidRecord { record: usize, detail: String },

    #[error("invalid step category {0:?} (expected load, process, split or export)")]
    BadStep(String),

    #[error("invalid digest {0:?}: expected 32 lowercase hex characters")]
    BadDigest(String),

    #[error("invalid format: {0}")]
    InvalidFormat(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),

    #[error("unknown version {version:?} of {name}; available: {}", available.join(", "))]
    UnknownVersion {
        name: String,
        version: String,
        available: Vec<String>,
    },

    #[error("checksum mismatch for {what}: expected {expected}, got {actual}")]
    ChecksumMismatch { what: String, expected: Digest, actual: Digest },

    #[error("{name} {version} has no pinned md5 in the catalog; refusing to load unverified data")]
    Unpinned { name: String, version: String },

    #[error("download of {url} failed: {message}")]
    DownloadFailure { url: String, message: String },

    #[error("{name} {version} is not cached and offline mode is set")]
    OfflineMiss { name: String, version: String },

    #[error("{name} {version} must be downloaded manually from {url} and placed at {}", target.display())]
    ManualDownload {
        name: String,
        version: String,
        url: String,
        target: PathBuf,
    },

    #[error("catalog error: {0}")]
    Catalog(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("all counts are zero")]
    AllZero,

    #[error("dataset has no ratings")]
    NoRatings,

    #[error("dataset has no timestamps")]
    NoTimestamps,

    #[error("invalid ratio: {0}")]
    BadRatio(String),

    #[error("invalid parameter: {0}")]
    BadArgument(String),

    #[error("too few interactions: {have} for {folds} folds")]
    TooFewInteractions { have: usize, folds: usize },

    #[error("step {step}: field {field}: {message}")]
    Schema { step: usize, field: String, message: String },

    #[error("step {step}: unknown operation {operation:?} for {category}")]
    UnknownOperation {
        step: usize,
        category: String,
        operation: String,
    },

    #[error("step {step}: parameter {param}: {message}")]
    BadParams { step: usize, param: String, message: String },

    #[error("step {step} ({operation}): {source}")]
    Step {
        step: usize,
        operation: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
