use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid scenario configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    FixedPoint { iterations: usize, residual: f64 },

    #[error("{stage} exceeded {iterations} iterations (last values: {trace:?})")]
    IterationCap {
        stage: &'static str,
        iterations: usize,
        trace: Vec<f64>,
    },

    #[error("{stage}: could not bracket a root ({detail})")]
    Bracket { stage: &'static str, detail: String },

    #[error("fractional numerator must be positive, got {0}")]
    NonPositiveNumerator(f64),
}
