use thiserror::Error;

/// Failures raised by the numerical pipelines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("theta truncation needs radius {required} but the policy caps it at {max_radius}")]
    TruncationOverflow { required: usize, max_radius: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("Hessian of the Kahler potential is not positive definite at y = {y:?} (smallest eigenvalue {min_eigenvalue:e})")]
    ConvexityViolation { y: Vec<f64>, min_eigenvalue: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("quadrature not converged at level k = {k}, index {j:?}: doubling the grid moved the value by {relative_change:e}")]
    QuadratureNotConverged {
        k: u32,
        j: Vec<u32>,
        relative_change: f64,
    },

    #[error("error field cross-check failed: direct {direct:e} vs ratio identity {identity:e}")]
    CrossCheckFailure { direct: f64, identity: f64 },

    #[error("asymptotic fit is ill-conditioned (condition number {condition:e})")]
    FitIllConditioned { condition: f64 },

    #[error("blended symplectic potential is not convex at mu = {mu:?}")]
    BlendNotConvex { mu: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
