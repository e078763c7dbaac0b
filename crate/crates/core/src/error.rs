use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the harvesting engine and its file formats.
#[derive(Debug, Error)]
pub enum IchError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unrecognized format: {0}")]
    UnrecognizedFormat(String),

    #[error("truncated: {0}")]
    Truncated(String),

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),

    #[error("index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("cluster count {k} out of range for {n} samples")]
    ClusterCountOutOfRange { k: usize, n: usize },

    #[error("silhouette needs at least 2 clusters, got {0}")]
    TooFewClusters(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown strategy {name:?} (known: {known})")]
    UnknownStrategy { name: String, known: String },

    #[error("dataset has no labels")]
    Unlabeled,

    #[error("no surviving clusters to assign to")]
    NoSurvivingClusters,

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl IchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IchError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by caller-supplied parameters rather than data.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            IchError::InvalidConfig(_)
                | IchError::UnknownStrategy { .. }
                | IchError::ClusterCountOutOfRange { .. }
                | IchError::Unlabeled
        )
    }
}

pub type Result<T> = std::result::Result<T, IchError>;
