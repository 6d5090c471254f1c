use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial family `{0}` is reserved but not implemented")]
    UnsupportedFamily(String),

    #[error("unknown polynomial family `{0}`")]
    UnknownFamily(String),

    #[error("basis of dimension {dim} and order {order} overflows the term count")]
    BasisOverflow { dim: usize, order: usize },

    #[error("basis index {index} out of range (basis has {len} terms)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigen-decomposition failed: {0}")]
    EigenFailure(String),

    #[error("negative spread {0} for uncertain parameter")]
    NegativeSpread(f64),

    #[error("nonpositive tread {0}")]
    NonPositiveTread(f64),

    #[error("Euler-angle singularity at pitch {0}")]
    EulerSingularity(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("Q_uu not positive definite at step {step} after maximum regularization")]
    NotPositiveDefinite { step: usize },

    #[error("box QP hit the iteration cap with gradient norm {grad_norm:e}")]
    BoxQpIterationCap { grad_norm: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
