use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exponent constraint violated: {0}")]
    Constraint(String),

    #[error("cutoff construction failed: {0}")]
    Cutoff(String),

    #[error("positivity violated at t = {time}: min(1 + {field}) = {min} below floor {floor}")]
    PositivityViolation {
        time: f64,
        field: &'static str,
        min: f64,
        floor: f64,
    },

    #[error("non-finite value encountered at t = {time}")]
    NonFinite { time: f64 },

    #[error("initial data too large: X0 = {x0} exceeds eps0 = {eps0}")]
    NotSmall { x0: f64, eps0: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("non-positive value {value} at t = {time} inside fit window")]
    NonPositive { time: f64, value: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("snapshot stride too coarse: {0}")]
    StrideTooCoarse(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
