use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read image {path}: {reason}")]
    UnreadableImage { path: PathBuf, reason: String },
    #[error("image has zero area")]
    EmptyImage,
    #[error("no ink found after binarization")]
    EmptyInk,
    #[error("shape context needs at least 6 edge pixels, found {0}")]
    TooFewEdgePoints(usize),
    #[error("distance of an empty vector")]
    EmptyVector,
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("linear system is singular or ill-conditioned: {0}")]
    SingularSystem(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("bad corpus layout: {0}")]
    BadLayout(String),
    #[error("writer {0} has no genuine signatures")]
    EmptyWriter(String),
    #[error("corpus cannot supply the requested sets: {0}")]
    InsufficientCorpus(String),
    #[error("outcomes contain a single class")]
    OneClassOnly,
    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("every response is a confusion decision")]
    AllConfused,
    #[error("bundle lacks model {0}")]
    MissingModel(String),
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("bad binary record: {0}")]
    Format(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error comes from bad input data rather than a bad request.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}
