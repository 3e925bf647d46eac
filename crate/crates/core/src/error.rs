use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown objective `{0}`")]
    UnknownObjective(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time step {dt:.3e} violates the stability limit {limit:.3e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite value encountered: {0}")]
    NotFinite(String),

    #[error("negative density {value:.3e} at index {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("kernel of width {width:.3e} does not fit inside the box of width {box_width:.3e}")]
    BoundaryTruncation { width: f64, box_width: f64 },

    #[error("point is not a local minimum: {0}")]
    NotLocalMinimum(String),

    #[error("iteration diverged: {0}")]
    Divergence(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed grid file {path}: {reason}")]
    GridFormat { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
