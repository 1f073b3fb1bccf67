use thiserror::Error;

/// Errors produced by the tracking library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no candidate paths to select from")]
    NoCandidates,

    #[error("malformed deformation field: {0}")]
    MalformedField(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
