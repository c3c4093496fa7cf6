use thiserror::Error;

/// Errors raised while building method tables or integrating.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquipError {
    #[error("Gauss-Legendre root refinement for k = {k} did not converge (residual {residual:e})")]
    QuadratureNotConverged { k: usize, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state outside the problem domain: {0}")]
    Domain(String),

    #[error("fixed-point iteration did not converge after {iterations} sweeps")]
    NotConverged { iterations: usize },

    #[error("unknown problem key `{0}` (expected kepler, pendulum, poisson or lotka)")]
    UnknownProblem(String),
}

pub type Result<T> = std::result::Result<T, EquipError>;
