use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point coordinate {value} in dimension {dim} lies outside [-1, 1]")]
    Domain { dim: usize, value: f64 },

    /// The base density is unbounded at a boundary point with a negative exponent.
    #[error("base weight is infinite at boundary coordinate {value} in dimension {dim}")]
    InfiniteWeight { dim: usize, value: f64 },

    #[error("linear system is singular to working precision (rcond = {rcond:e})")]
    Conditioning { rcond: f64 },

    #[error("corrupt sample: {0}")]
    CorruptSample(String),

    #[error("degenerate point: residual norm {residual:e} below threshold")]
    DegeneratePoint { residual: f64 },

    #[error("quadrature budget exceeded: {nodes} nodes requested, cap is {cap}")]
    Budget { nodes: u128, cap: u128 },

    #[error("numerical inconsistency: {0}")]
    Inconsistent(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
