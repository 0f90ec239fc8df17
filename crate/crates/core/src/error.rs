use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("node index {index} out of range for a grid with {steps} steps")]
    IndexOutOfRange { index: usize, steps: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("space mismatch: operator expects `{expected}`, trajectory lives in `{found}`")]
    SpaceMismatch { expected: String, found: String },

    #[error("alternating projection did not converge after {iterations} sweeps (last change {residual:.3e})")]
    Projection { iterations: usize, residual: f64 },

    #[error("smallness condition violated: m_A - m_j*|M1|^2 = {margin:.6e} must be positive")]
    Smallness { margin: f64 },

    #[error("per-step inequality solve did not converge after {iterations} iterations (last residual {residual:.3e})")]
    InnerNonConvergence { iterations: usize, residual: f64 },

    #[error("implicit ODE step failed: {0}")]
    Picard(String),

    #[error("fixed-point iteration failed to contract after {iterations} iterations (last distance {distance:.3e})")]
    ContractionFailure { iterations: usize, distance: f64 },

    #[error("constraint residual {residual:.3e} exceeds 1e-10 at node {node}")]
    Infeasible { node: usize, residual: f64 },

    #[error("discrete inequality residual {residual:.3e} exceeds tolerance {tol:.1e} at node {node}")]
    InequalityResidual { node: usize, residual: f64, tol: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Problems with the input rather than with a solve.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Dimension { .. }
                | Error::IndexOutOfRange { .. }
                | Error::NotPositiveDefinite(_)
                | Error::InvalidInput(_)
                | Error::SpaceMismatch { .. }
                | Error::Smallness { .. }
                | Error::Config(_)
                | Error::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
