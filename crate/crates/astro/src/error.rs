use thiserror::Error;

use crate::state::CartesianState;

pub type Result<T, E = AstroError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AstroError {
    #[error("invalid input: {0}")]
    Domain(String),

    #[error("step size underflow at t = {:.6} TU (h = {step:.3e} TU)", last_good.epoch)]
    StepUnderflow { last_good: CartesianState, step: f64 },

    #[error("impact: radius {radius:.6} DU at t = {:.6} TU", last_good.epoch)]
    Impact { last_good: CartesianState, radius: f64 },

    #[error("non-finite state at t = {:.6} TU", last_good.epoch)]
    NonFinite { last_good: CartesianState },

    #[error("inclination within 1e-9 rad of the f_r = {f_r:+} singularity; use f_r = {:+}", -f_r)]
    Singularity { f_r: i8 },

    #[error("Kepler's equation did not converge in {iterations} iterations (residual {residual:.3e})")]
    Iteration { iterations: usize, residual: f64 },

    #[error("degenerate RIC frame: position and velocity are parallel")]
    DegenerateFrame,

    #[error("covariance is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    Decomposition { eigenvalue: f64 },

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Core(#[from] sepsr::SrError),
}
