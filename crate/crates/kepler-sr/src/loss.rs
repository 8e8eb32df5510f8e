//! Loss functions for candidate scoring. Both treat any invalid prediction
//! as disqualifying: a NaN anywhere makes the whole loss infinite.

/// Tolerance scale for the description-length loss, in target units.
pub const DL_EPSILON: f64 = 1e-5;

/// Mean squared error. Infinite if any prediction is non-finite.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len());
    if pred.is_empty() {
        return f64::INFINITY;
    }
    let mut acc = 0.0;
    for (p, t) in pred.iter().zip(target) {
        if !p.is_finite() {
            return f64::INFINITY;
        }
        let e = p - t;
        acc += e * e;
    }
    acc / pred.len() as f64
}

/// Description-length loss: the average number of bits needed to correct
/// each prediction to tolerance `DL_EPSILON`,
/// (1/n) * sum of 0.5*log2(1 + (err/eps)^2).
///
/// Saturates smoothly near zero error (an exact fit costs nothing) and
/// grows only logarithmically for gross misses, so one bad region cannot
/// dominate the score the way it does under mean squared error.
pub fn dl_loss(pred: &[f64], target: &[f64]) -> f64 {
    dl_loss_with_eps(pred, target, DL_EPSILON)
}

pub fn dl_loss_with_eps(pred: &[f64], target: &[f64], eps: f64) -> f64 {
    assert_eq!(pred.len(), target.len());
    if pred.is_empty() {
        return f64::INFINITY;
    }
    let mut acc = 0.0;
    for (p, t) in pred.iter().zip(target) {
        if !p.is_finite() {
            return f64::INFINITY;
        }
        let r = (p - t) / eps;
        acc += 0.5 * (1.0 + r * r).log2();
    }
    acc / pred.len() as f64
}
