use thiserror::Error;

/// Errors produced by the prediction engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("adjacency matrix is not symmetric at ({row}, {col})")]
    NonSymmetric { row: usize, col: usize },

    #[error("group is not enumerable: {0}")]
    NotEnumerable(String),

    #[error("rank-deficient design{}: {detail}", branch.map(|b| format!(" in branch {b}")).unwrap_or_default())]
    RankDeficient { branch: Option<usize>, detail: String },

    #[error("degenerate confidence band in branch {branch} at x = {x:?}")]
    DegenerateBand { branch: usize, x: Vec<f64> },

    #[error("malformed data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
