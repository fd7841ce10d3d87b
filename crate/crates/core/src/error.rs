use thiserror::Error;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid quadrature request: {0}")]
    InvalidQuadrature(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("phase value {value} outside (-1, 1)")]
    Domain { value: f64 },

    #[error("non-positive coefficient {value} at a quadrature point")]
    NonPositiveCoefficient { value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("linear solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    LinearSolver {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("newton did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("bound violation at step {step}: max |phi| = {max_abs}")]
    BoundViolation { step: usize, max_abs: f64 },

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
