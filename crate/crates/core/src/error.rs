use thiserror::Error;

/// Errors raised across the synchronization pipeline.
#[derive(Debug, Error)]
pub enum SyncError {
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric: entry ({row}, {col}) differs from its transpose by {diff:.3e}")]
    Asymmetric { row: usize, col: usize, diff: f64 },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("corruption probability {0} is outside (0, 1]")]
    InvalidProbability(f64),

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("kind mismatch: {0}")]
    KindMismatch(String),

    #[error("index {index} out of range for {len} group elements")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("input matrix is numerically singular (smallest singular value {0:.3e})")]
    SingularInput(f64),

    #[error("columns are not orthonormal (deviation {0:.3e})")]
    NotOrthonormal(f64),

    #[error("invalid sweep configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SyncError>;
