//! Nonlinear least-squares oracle for the orbit equation itself:
//! r = a / (1 + eps*cos(theta)) fitted directly over (a, eps).

use super::lm::{minimize, LmOptions};
use super::{EllipseParams, FitError};
use crate::dataset::Dataset;

/// Fits (a, eps) by damped least squares from a0 = mean(r), eps0 = 0.1.
/// The eccentricity is fitted signed (an aphelion-origin table converges
/// to a negative value) and returned as a magnitude.
pub fn fit_ellipse(data: &Dataset) -> Result<EllipseParams, FitError> {
    let n = data.len();
    if n < 3 {
        return Err(FitError::Convergence(format!(
            "need at least 3 samples, got {n}"
        )));
    }
    let thetas = data.thetas();
    let radii = data.radii();
    let mut distinct = thetas.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(FitError::Convergence(
            "need at least 2 distinct angles".into(),
        ));
    }

    let mean_r = radii.iter().sum::<f64>() / n as f64;
    let start = [mean_r, 0.1];
    let outcome = minimize(
        |c: &[f64], r: &mut [f64]| {
            for i in 0..n {
                let denom = 1.0 + c[1] * thetas[i].cos();
                if denom == 0.0 {
                    return false;
                }
                r[i] = c[0] / denom - radii[i];
                if !r[i].is_finite() {
                    return false;
                }
            }
            true
        },
        n,
        &start,
        &LmOptions {
            max_iterations: 200,
            ..LmOptions::default()
        },
    );

    if !outcome.converged {
        return Err(FitError::Convergence(format!(
            "no residual decrease within {} iterations",
            200
        )));
    }
    let a = outcome.constants[0].abs();
    let eps = outcome.constants[1].abs();
    if !a.is_finite() || !eps.is_finite() || !(a > 0.0) || eps >= 1.0 {
        return Err(FitError::Convergence(format!(
            "optimizer left the orbit domain: a = {a}, eps = {eps}"
        )));
    }
    Ok(EllipseParams {
        a,
        eccentricity: eps,
    })
}
