use thiserror::Error;

/// Errors surfaced by kernel and driver operations.
#[derive(Debug, Error)]
pub enum QmcError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("logic error: {0}")]
    Logic(String),

    #[error("singular matrix in determinant evaluation")]
    SingularMatrix,

    #[error("near-singular determinant update (|ratio| = {ratio:e})")]
    NearSingularUpdate { ratio: f64 },

    #[error("divergent Coulomb pair at distance {dist:e}")]
    CoulombDivergence { dist: f64 },

    #[error("walker verification failed: {0}")]
    Verification(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed data: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, QmcError>;
