use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("proximal solve did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("local Lipschitz modulus requested without a radius")]
    ModulusUnavailable,

    #[error("the weighted-norm mode needs a globally Lipschitz coupling")]
    GlobalModulusRequired,

    #[error("Picard iterate left the ball of radius {radius} around u0 at t = {time} (distance {distance})")]
    BallEscape { time: f64, distance: f64, radius: f64 },

    #[error("Picard iteration stopped at the cap of {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("solution blew up at t = {time} (|u| = {norm:e})")]
    BlowUp { time: f64, norm: f64 },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("boundary data mismatch: {0}")]
    BoundaryMismatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
