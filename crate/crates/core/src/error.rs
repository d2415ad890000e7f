use std::path::PathBuf;

use crate::data::Label;

/// Errors produced anywhere in the bag classification pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("bag {bag_id}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        bag_id: String,
        expected: usize,
        found: usize,
    },

    #[error("conflicting labels within bag {bag_id}")]
    ConflictingLabels { bag_id: String },

    #[error("empty file: {0}")]
    EmptyFile(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid bag {bag_id}: {message}")]
    InvalidBag { bag_id: String, message: String },

    #[error("degenerate covariance: all training instances are identical")]
    DegenerateCovariance,

    #[error("zero sample variance; pass an explicit bandwidth")]
    ZeroVariance,

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("no {0} bags available")]
    MissingClass(Label),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bag {bag_id}: {source}")]
    BagFit {
        bag_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("scenario grids mismatched: {0}")]
    ScenarioMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn for_bag(self, bag_id: &str) -> Self {
        Error::BagFit {
            bag_id: bag_id.to_string(),
            source: Box::new(self),
        }
    }
}
