use thiserror::Error;

/// Errors produced by model construction, database handling, and the solve
/// pipeline. Solver non-convergence is not an error; it is reported through
/// iteration status codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid robot model: {0}")]
    InvalidModel(String),

    #[error("model file error: {0}")]
    ModelParse(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("requested grid has {requested} records, over the ceiling of {ceiling}")]
    TooManyRecords { requested: u64, ceiling: u64 },

    #[error("database fingerprint does not match the supplied model")]
    IncompatibleModel,

    #[error("malformed database file at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("candidate list is empty")]
    NoCandidates,

    #[error("re-selection pool exhausted: every pool candidate already failed")]
    PoolExhausted,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
