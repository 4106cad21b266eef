use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("shape mismatch: expected {expected} components, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("rescale function must be positive, f = {value} at {point:?}")]
    NonPositiveRescale { point: Vec<f64>, value: f64 },

    #[error("bundle dimension {dim} exceeds the oracle limit {max}")]
    DimensionGuard { dim: usize, max: usize },

    #[error("integration step underflow at s = {s}")]
    StepUnderflow { s: f64 },

    #[error("curve left the chart box at {point:?}")]
    ChartExit { point: Vec<f64> },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
