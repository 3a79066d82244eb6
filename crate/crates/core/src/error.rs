use thiserror::Error;

use crate::circuitio::ParseError;
use crate::hilbert::DensityMatrix2;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("state is not normalized (squared norm {norm2})")]
    NotNormalized { norm2: f64 },

    #[error("dimension mismatch: m_max {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("no probability mass in the requested subspace (weight {weight:e})")]
    EmptySubspace { weight: f64 },

    #[error(
        "`{element}` would move amplitude to m = {m}, beyond the truncation bound m_max = {m_max}"
    )]
    TruncationOverflow {
        element: String,
        m: i64,
        m_max: usize,
    },

    #[error("`{element}` precondition violated: {reason}")]
    Precondition { element: String, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed interferometer: {0}")]
    MalformedInterferometer(String),

    #[error("analyzer list is empty")]
    EmptyAnalyzers,

    #[error("missing analyzer `{0}`")]
    MissingAnalyzer(String),

    #[error("no counts in basis pair {0}")]
    ZeroCounts(String),

    #[error("maximum-likelihood reconstruction did not converge after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        best: Box<DensityMatrix2>,
    },

    #[error(transparent)]
    Parse(#[from] ParseError),
}
