use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("the zero wavenumber (0, 0) is not a mode")]
    ZeroMode,

    #[error("mode ({0}, {1}) lies outside the truncation")]
    ModeOutsideBasis(i32, i32),

    #[error("fields are defined on different bases")]
    BasisMismatch,

    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("time {time} is not a node of the grid with step {dt}")]
    OffGrid { time: f64, dt: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration blew up at step {step}: a coefficient exceeded {limit:e}")]
    BlowUp { step: usize, limit: f64 },

    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    #[error("malformed trajectory record: {0}")]
    MalformedRecord(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidParameter(msg.into())
}
