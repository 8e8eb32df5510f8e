//! Free-constant fitting for candidate expressions: multistart damped
//! least squares with rows outside the expression's domain masked per
//! start, and a strictly recomputed final score.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lm::{minimize, LmOptions};
use super::FitResult;
use crate::dataset::FeatureMatrix;
use crate::expr::{eval_into, evaluate, Expr};
use crate::loss::mse_loss;

/// Seed for the restart sampler. Starts depend only on the slot count, so
/// every candidate with the same number of constants sees the same starts,
/// and concurrency cannot reorder them.
pub const FIT_RESTART_SEED: u64 = 1609;

pub const DEFAULT_RESTARTS: usize = 4;

/// Fits the expression's constant slots to the feature matrix by damped
/// least squares from the all-ones start plus `restarts` seeded uniform
/// draws in [-3, 3]. The reported mse is recomputed at the returned
/// constants over every row; a candidate whose final constants leave any
/// row outside its domain scores infinity, and one with more than half the
/// rows invalid at every start is skipped outright.
pub fn fit_constants(expr: &Expr, data: &FeatureMatrix, restarts: usize) -> FitResult {
    let k = expr.slot_count();
    let n = data.rows();

    if k == 0 {
        let mse = match evaluate(expr, &[], &data.columns) {
            Ok(pred) => mse_loss(&pred, &data.target),
            Err(_) => f64::INFINITY,
        };
        return FitResult {
            constants: Vec::new(),
            mse,
            converged: true,
            n_iterations: 0,
        };
    }

    let mut starts = Vec::with_capacity(restarts + 1);
    starts.push(vec![1.0; k]);
    let mut rng = ChaCha8Rng::seed_from_u64(FIT_RESTART_SEED);
    for _ in 0..restarts {
        starts.push((0..k).map(|_| rng.gen_range(-3.0..3.0)).collect());
    }

    let mut best: Option<FitResult> = None;
    let mut scratch = vec![0.0; n];
    for start in &starts {
        let Some(candidate) = descend_from(expr, data, start, &mut scratch) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some(b) => candidate.mse < b.mse,
        };
        if better {
            best = Some(candidate);
        }
    }

    best.unwrap_or(FitResult {
        constants: vec![1.0; k],
        mse: f64::INFINITY,
        converged: false,
        n_iterations: 0,
    })
}

/// A single descent from caller-chosen constants, for refitting composed
/// equations that already carry a good seed. When the seed leaves every
/// row in-domain this can only improve on the seed's own score.
pub fn fit_constants_from(expr: &Expr, data: &FeatureMatrix, start: &[f64]) -> FitResult {
    assert_eq!(expr.slot_count(), start.len(), "seed length mismatch");
    if start.is_empty() {
        return fit_constants(expr, data, 0);
    }
    let mut scratch = vec![0.0; data.rows()];
    descend_from(expr, data, start, &mut scratch).unwrap_or(FitResult {
        constants: start.to_vec(),
        mse: f64::INFINITY,
        converged: false,
        n_iterations: 0,
    })
}

/// One damped-least-squares descent with the rows the start cannot evaluate
/// masked out; None when more than half the rows are already invalid.
fn descend_from(
    expr: &Expr,
    data: &FeatureMatrix,
    start: &[f64],
    scratch: &mut [f64],
) -> Option<FitResult> {
    let n = data.rows();
    eval_into(expr, start, &data.columns, scratch);
    let valid: Vec<usize> = (0..n).filter(|&i| scratch[i].is_finite()).collect();
    if 2 * (n - valid.len()) > n {
        return None;
    }

    let masked_cols: Vec<Vec<f64>> = data
        .columns
        .iter()
        .map(|col| valid.iter().map(|&i| col[i]).collect())
        .collect();
    let masked_target: Vec<f64> = valid.iter().map(|&i| data.target[i]).collect();
    let m = valid.len();
    let outcome = minimize(
        |c: &[f64], r: &mut [f64]| {
            eval_into(expr, c, &masked_cols, r);
            for i in 0..m {
                if !r[i].is_finite() {
                    return false;
                }
                r[i] -= masked_target[i];
            }
            true
        },
        m,
        start,
        &LmOptions::default(),
    );

    let mse = match evaluate(expr, &outcome.constants, &data.columns) {
        Ok(pred) => mse_loss(&pred, &data.target),
        Err(_) => f64::INFINITY,
    };
    Some(FitResult {
        constants: outcome.constants,
        mse,
        converged: outcome.converged,
        n_iterations: outcome.iterations,
    })
}
