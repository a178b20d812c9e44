//! Error types, one enum per layer.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("spectrum is empty")]
    Empty,
    #[error("eigenvalue {index} is negative ({value})")]
    Negative { index: usize, value: f64 },
    #[error("eigenvalue {index} is not finite")]
    NotFinite { index: usize },
    #[error("eigenvalues are not non-increasing at index {index}")]
    NotSorted { index: usize },
    #[error("spectrum has no positive eigenvalue")]
    AllZero,
    #[error("index k = {k} outside 1..={p}")]
    IndexOutOfRange { k: usize, p: usize },
    #[error("rotation is not orthogonal (max |QᵀQ - I| = {deviation:e})")]
    NotOrthogonal { deviation: f64 },
    #[error("line {line}: cannot parse {token:?} as a number")]
    Parse { line: usize, token: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("k* infinite: no k satisfies r_k / λ_k >= c0·n")]
    InfiniteKStar,
    #[error("r_{{k*}} is zero: degenerate tail")]
    DegenerateTail,
    #[error("{0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("covariance rank {rank} is below n = {n}")]
    RankDeficient { rank: usize, n: usize },
    #[error("p = {p} < n = {n}; low-dimensional designs need the explicit override")]
    LowDimensional { n: usize, p: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular value decomposition did not converge")]
    Decomposition,
    #[error("matrix dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid noise parameter: {0}")]
    InvalidParameter(String),
    #[error("noise vector file {path}: {message}")]
    File { path: String, message: String },
    #[error(transparent)]
    Design(#[from] DesignError),
}
