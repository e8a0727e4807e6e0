use thiserror::Error;

/// Errors raised by the construction and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid piecewise-linear function: {0}")]
    InvalidPwl(String),

    #[error("zero slope on [{lo}, {hi}] collapses mass onto an atom")]
    ZeroSlope { lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid cell: {0}")]
    InvalidCell(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("index {index:?} out of range for resolution {n}")]
    OutOfRange { index: Vec<usize>, n: usize },

    #[error("measures carry different total mass ({left} vs {right})")]
    MassMismatch { left: f64, right: f64 },

    #[error("transport instance with {atoms} atoms exceeds the exact solver budget of {budget}")]
    OverBudget { atoms: usize, budget: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
