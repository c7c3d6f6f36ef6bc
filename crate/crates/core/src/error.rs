use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid point: norm {norm} is not 1")]
    InvalidPoint { norm: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate triangle: {0}")]
    DegenerateTriangle(String),
    #[error("infeasible triangle: {0}")]
    InfeasibleTriangle(String),
    #[error("unsupported analysis: {0}")]
    UnsupportedAnalysis(String),
    #[error("no convergence after {iterations} iterations (last step {last_step:e})")]
    NonConvergence { iterations: u64, last_step: f64 },
    #[error("exhausted: {0}")]
    Exhausted(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
