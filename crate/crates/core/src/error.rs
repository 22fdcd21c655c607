use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("matrix data length {got} does not match {rows}x{cols}")]
    InvalidData { rows: usize, cols: usize, got: usize },
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("matrix has no rows or no columns")]
    Empty,
    #[error("SVD failed to converge after {iterations} sweeps")]
    SvdNoConvergence { iterations: usize },
    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    Singular { pivot: usize, value: f64 },
    #[error("matrix is rank deficient: numerical rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },
    #[error("sketched Hessian is singular (sketch size {m} too small for dimension {d}); increase m")]
    SketchRankDeficient { m: usize, d: usize },
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),
    #[error("leverage-score sketch requires a probability vector")]
    MissingLeverage,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
