//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad caller input: shape mismatch, out-of-range parameter, empty data.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Cholesky failed even after the jitter escalation schedule.
    #[error("matrix not positive definite after {attempts} jitter attempts (last jitter {last_jitter:e})")]
    NotPositiveDefinite { attempts: usize, last_jitter: f64 },

    /// Zero pivot in a triangular solve.
    #[error("singular triangular factor (zero diagonal at row {0})")]
    Singular(usize),

    /// Regression with a zero-variance regressor or otherwise unidentifiable fit.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Trend basis without full column rank.
    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    /// Design sites affinely dependent (thin-plate spline needs a full affine frame).
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    /// Requested dimension not supported (e.g. Sobol direction numbers ship for d <= 8).
    #[error("unsupported dimension {got} (max {max})")]
    UnsupportedDimension { got: usize, max: usize },

    /// Closed form undefined at this parameter value (e.g. phi = 1).
    #[error("singular formula: {0}")]
    SingularFormula(String),

    /// Configuration file problems.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
