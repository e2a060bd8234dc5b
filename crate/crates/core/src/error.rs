use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = StitchError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum StitchError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("bundle ({i}, {j}) is already present")]
    DuplicatePair { i: usize, j: usize },

    #[error("bundle endpoints must satisfy i < j, got ({i}, {j})")]
    UnorderedPair { i: usize, j: usize },

    #[error("bundle references missing node {0}")]
    MissingNode(usize),

    #[error("bundle ({i}, {j}) has no candidates")]
    EmptyBundle { i: usize, j: usize },

    #[error("invalid weights on bundle ({i}, {j}): {reason}")]
    InvalidWeights { i: usize, j: usize, reason: String },

    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),

    #[error("feature set is empty")]
    NoFeatures,

    #[error("search range lies entirely outside the image overlap")]
    NoOverlap,

    #[error("no overlapping tile pairs")]
    NoOverlappingPairs,

    #[error("graph weights have not been solved")]
    UnsolvedWeights,

    #[error("rms is undefined on an empty edge set")]
    EmptyEdgeSet,

    #[error("tile set mismatch: {0}")]
    TileMismatch(String),

    #[error("missing offset for tile {0}")]
    MissingOffset(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step failed: step size underflow")]
    StepFailure,
}

impl StitchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StitchError::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            StitchError::Io { .. } | StitchError::Image { .. } => ErrorKind::Io,
            StitchError::Json(_)
            | StitchError::Schema(_)
            | StitchError::DuplicatePair { .. }
            | StitchError::UnorderedPair { .. }
            | StitchError::MissingNode(_)
            | StitchError::EmptyBundle { .. }
            | StitchError::InvalidWeights { .. }
            | StitchError::InvalidCandidate(_)
            | StitchError::TileMismatch(_)
            | StitchError::MissingOffset(_)
            | StitchError::Config(_) => ErrorKind::Schema,
            _ => ErrorKind::Pipeline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Schema,
    Pipeline,
}
