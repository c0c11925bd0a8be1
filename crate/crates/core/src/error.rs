use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("integer overflow in cyclotomic arithmetic")]
    Overflow,

    #[error("{0} is not divisible by {1} in Z[xi]")]
    NotDivisible(String, String),

    #[error("empty support")]
    EmptySupport,

    #[error("singular linear map (det = {0:e})")]
    SingularMap(f64),

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("measure-zero window: rasterization forbidden")]
    MeasureZeroWindow,

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("ghost transition: nu[{j}][{i}] = {value} on a measure-zero window")]
    GhostTransition { j: usize, i: usize, value: f64 },

    #[error("column {0} has no positive-area transition window")]
    EmptyColumn(usize),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("power iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("PF1 violated: {0}")]
    Pf1Violated(String),

    #[error("grid underflow for transition ({j},{i}): {reason}")]
    GridUnderflow { j: usize, i: usize, reason: String },

    #[error("fixed-point iteration exceeded {iterations} iterations (last residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("insufficient radius: T_s for transition ({j},{i}) is empty but nu > 0")]
    InsufficientRadius { j: usize, i: usize },

    #[error("empty point list")]
    EmptyPointList,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
