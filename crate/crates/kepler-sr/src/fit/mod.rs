//! Constant fitting: Levenberg-Marquardt nonlinear least squares for
//! expression constants and the orbit-ellipse oracle, plus ordinary least
//! squares for polynomial seeding.

pub mod constants;
pub mod ellipse;
pub mod lm;
pub mod poly;

pub use constants::{fit_constants, fit_constants_from, DEFAULT_RESTARTS};
pub use ellipse::fit_ellipse;
pub use poly::{fit_polynomial, PolyFit};

/// Orbit parameters of r = a / (1 + eccentricity * cos(theta)).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EllipseParams {
    pub a: f64,
    pub eccentricity: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("fit did not converge: {0}")]
    Convergence(String),
    #[error("invalid fitting problem: {0}")]
    Domain(String),
}

/// Outcome of a constant fit. The mse is always recomputed from the
/// returned constants over the full dataset, never taken from optimizer
/// bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub constants: Vec<f64>,
    pub mse: f64,
    pub converged: bool,
    pub n_iterations: usize,
}
