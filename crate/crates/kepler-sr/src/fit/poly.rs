//! Ordinary least squares on a monomial basis, used to seed the search
//! with the polynomial family the Pareto tables are full of.

use super::{FitError, FitResult};
use crate::dataset::FeatureMatrix;
use crate::expr::{BinaryOp, Expr, UnaryOp};
use crate::loss::mse_loss;

pub const MAX_POLY_DEGREE: usize = 6;

/// Scaled-space magnitude below which a coefficient is pruned to zero.
pub const COEFFICIENT_PRUNE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PolyFit {
    pub expr: Expr,
    pub result: FitResult,
    /// True when the Gram matrix was singular and one or more dependent
    /// basis columns were dropped (their coefficients forced to zero).
    pub rank_deficient: bool,
}

/// Exact least squares over all monomials of the features up to the given
/// total degree, solved by scaled normal equations. The constant term is
/// always present; terms are ordered by descending total degree.
pub fn fit_polynomial(data: &FeatureMatrix, degree: usize) -> Result<PolyFit, FitError> {
    if degree > MAX_POLY_DEGREE {
        return Err(FitError::Domain(format!(
            "degree {degree} exceeds the maximum {MAX_POLY_DEGREE}"
        )));
    }
    let n = data.rows();
    let d = data.arity();
    if n == 0 || d == 0 {
        return Err(FitError::Domain("empty feature matrix".into()));
    }

    let monomials = monomial_exponents(d, degree);
    let m = monomials.len();

    let mut basis = vec![vec![0.0; n]; m];
    for (j, exps) in monomials.iter().enumerate() {
        for i in 0..n {
            let mut v = 1.0;
            for (f, &e) in exps.iter().enumerate() {
                v *= data.columns[f][i].powi(e as i32);
            }
            basis[j][i] = v;
        }
    }

    // column scaling keeps the Gram matrix conditioned across degrees
    let scales: Vec<f64> = basis
        .iter()
        .map(|col| {
            let s = col.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();

    let mut gram = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for a in 0..m {
        for b in a..m {
            let mut acc = 0.0;
            for i in 0..n {
                acc += (basis[a][i] / scales[a]) * (basis[b][i] / scales[b]);
            }
            gram[a][b] = acc;
            gram[b][a] = acc;
        }
        let mut acc = 0.0;
        for i in 0..n {
            acc += (basis[a][i] / scales[a]) * data.target[i];
        }
        rhs[a] = acc;
    }

    let (scaled_coeffs, rank_deficient) = solve_with_column_skips(gram, rhs, n);

    let mut coefficients = vec![0.0; m];
    for j in 0..m {
        if scaled_coeffs[j].abs() >= COEFFICIENT_PRUNE_TOLERANCE {
            coefficients[j] = scaled_coeffs[j] / scales[j];
        }
    }

    let mut pred = vec![0.0; n];
    for j in 0..m {
        if coefficients[j] == 0.0 {
            continue;
        }
        for i in 0..n {
            pred[i] += coefficients[j] * basis[j][i];
        }
    }
    let mse = mse_loss(&pred, &data.target);

    Ok(PolyFit {
        expr: polynomial_expr(&monomials),
        result: FitResult {
            constants: coefficients,
            mse,
            converged: true,
            n_iterations: 1,
        },
        rank_deficient,
    })
}

/// All exponent vectors with total degree <= degree, sorted by descending
/// total degree then descending lexicographic order, so the constant term
/// comes last the way the reference tables print polynomials.
fn monomial_exponents(arity: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut all = Vec::new();
    let mut current = vec![0u32; arity];
    fill_exponents(arity, degree as u32, 0, &mut current, &mut all);
    all.sort_by(|a, b| {
        let ta: u32 = a.iter().sum();
        let tb: u32 = b.iter().sum();
        tb.cmp(&ta).then_with(|| b.cmp(a))
    });
    all
}

fn fill_exponents(
    arity: usize,
    budget: u32,
    index: usize,
    current: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if index == arity {
        out.push(current.clone());
        return;
    }
    for e in 0..=budget {
        current[index] = e;
        fill_exponents(arity, budget - e, index + 1, current, out);
    }
    current[index] = 0;
}

/// Gaussian elimination with partial pivoting that skips dependent
/// columns (zeroing their coefficients) instead of failing.
fn solve_with_column_skips(
    mut a: Vec<Vec<f64>>,
    mut b: Vec<f64>,
    n_rows: usize,
) -> (Vec<f64>, bool) {
    let m = b.len();
    let tolerance = 1e-10 * n_rows as f64;
    let mut skipped = vec![false; m];
    let mut row = 0;
    let mut pivot_of_col = vec![usize::MAX; m];
    for col in 0..m {
        let pivot_row = (row..m)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap());
        let pivot_row = match pivot_row {
            Some(p) if a[p][col].abs() > tolerance => p,
            _ => {
                skipped[col] = true;
                continue;
            }
        };
        a.swap(row, pivot_row);
        b.swap(row, pivot_row);
        for r in row + 1..m {
            let factor = a[r][col] / a[row][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..m {
                a[r][c] -= factor * a[row][c];
            }
            b[r] -= factor * b[row];
        }
        pivot_of_col[col] = row;
        row += 1;
    }

    let mut x = vec![0.0; m];
    for col in (0..m).rev() {
        if skipped[col] {
            continue;
        }
        let r = pivot_of_col[col];
        let mut acc = b[r];
        for c in col + 1..m {
            acc -= a[r][c] * x[c];
        }
        x[col] = acc / a[r][col];
    }
    let any_skipped = skipped.iter().any(|&s| s);
    (x, any_skipped)
}

/// Expression tree for the monomial sum, one constant slot per term, in
/// the same order as the coefficient vector.
fn polynomial_expr(monomials: &[Vec<u32>]) -> Expr {
    let mut terms = monomials.iter().enumerate().map(|(slot, exps)| {
        let mut factors: Option<Expr> = None;
        for (f, &e) in exps.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let p = feature_power(f, e);
            factors = Some(match factors {
                None => p,
                Some(acc) => Expr::binary(BinaryOp::Mul, acc, p),
            });
        }
        match factors {
            None => Expr::Constant(slot),
            Some(f) => Expr::binary(BinaryOp::Mul, Expr::Constant(slot), f),
        }
    });
    let first = terms.next().expect("constant term always present");
    terms.fold(first, |acc, t| Expr::binary(BinaryOp::Add, acc, t))
}

fn feature_power(feature: usize, exponent: u32) -> Expr {
    let x = Expr::Feature(feature);
    match exponent {
        1 => x,
        2 => Expr::unary(UnaryOp::Square, x),
        3 => Expr::unary(UnaryOp::Cube, x),
        4 => Expr::unary(UnaryOp::Square, Expr::unary(UnaryOp::Square, x)),
        5 => Expr::binary(
            BinaryOp::Mul,
            Expr::unary(UnaryOp::Square, Expr::unary(UnaryOp::Square, x.clone())),
            x,
        ),
        6 => Expr::unary(UnaryOp::Square, Expr::unary(UnaryOp::Cube, x)),
        _ => unreachable!("degree capped at {MAX_POLY_DEGREE}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{featurize, load_rudolphine_csv};
    use crate::expr::evaluate;
    use crate::BiasConfig;
    use std::path::Path;

    fn single_feature(xs: Vec<f64>, ys: Vec<f64>) -> FeatureMatrix {
        FeatureMatrix {
            names: vec!["x".into()],
            columns: vec![xs],
            target: ys,
        }
    }

    #[test]
    fn degree_zero_is_the_mean() {
        let m = single_feature(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 6.0]);
        let fit = fit_polynomial(&m, 0).unwrap();
        assert_eq!(fit.result.constants.len(), 1);
        assert!((fit.result.constants[0] - 3.0).abs() < 1e-12);
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn recovers_a_pure_square_exactly() {
        let xs: Vec<f64> = (0..25).map(|i| i as f64 * 0.25 - 3.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let fit = fit_polynomial(&single_feature(xs, ys), 2).unwrap();
        // order: x^2, x, constant
        assert!((fit.result.constants[0] - 1.0).abs() < 1e-12);
        assert_eq!(fit.result.constants[1], 0.0);
        assert_eq!(fit.result.constants[2], 0.0);
        assert!(fit.result.mse < 1e-20);
    }

    #[test]
    fn negligible_higher_terms_prune_to_exact_zero() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.2 - 3.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let fit = fit_polynomial(&single_feature(xs, ys), 3).unwrap();
        assert_eq!(fit.result.constants[0], 0.0, "cubic term");
        assert!((fit.result.constants[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cubic_error_floor_on_the_digitized_table() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/rudolphine_mars.csv");
        let d = load_rudolphine_csv(Path::new(path)).unwrap();
        let m = featurize(
            &d,
            BiasConfig {
                observational: false,
                inductive: false,
            },
        );
        let fit = fit_polynomial(&m, 3).unwrap();
        assert!(fit.result.converged);
        // a full least-squares cubic lands well under the published table
        // row (whose display constants are rounded to two decimals), but a
        // cubic still cannot reach the noise floor of the true orbit shape
        assert!(
            fit.result.mse > 1e-7 && fit.result.mse < 3.6e-5,
            "mse {}",
            fit.result.mse
        );
        let pred = evaluate(&fit.expr, &fit.result.constants, &m.columns).unwrap();
        let direct = mse_loss(&pred, &m.target);
        assert!((direct - fit.result.mse).abs() < 1e-15);
    }

    #[test]
    fn constant_feature_column_is_rank_deficient() {
        let m = single_feature(vec![2.0; 10], (0..10).map(|i| i as f64).collect());
        let fit = fit_polynomial(&m, 1).unwrap();
        assert!(fit.rank_deficient);
        assert!(fit.result.mse.is_finite());
    }

    #[test]
    fn multi_feature_cross_term_recovered() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut target = Vec::new();
        for i in 0..12 {
            for j in 0..12 {
                let x = i as f64 * 0.3 - 1.8;
                let y = j as f64 * 0.3 - 1.8;
                xs.push(x);
                ys.push(y);
                target.push(2.0 * x * y + 0.5);
            }
        }
        let m = FeatureMatrix {
            names: vec!["x".into(), "y".into()],
            columns: vec![xs, ys],
            target,
        };
        let fit = fit_polynomial(&m, 2).unwrap();
        assert!(fit.result.mse < 1e-20);
        let pred = evaluate(&fit.expr, &fit.result.constants, &m.columns).unwrap();
        assert!(mse_loss(&pred, &m.target) < 1e-20);
    }

    #[test]
    fn degree_above_cap_is_rejected() {
        let m = single_feature(vec![0.0, 1.0], vec![0.0, 1.0]);
        assert!(matches!(
            fit_polynomial(&m, 7),
            Err(FitError::Domain(_))
        ));
    }

    #[test]
    fn expression_slot_order_matches_coefficients() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x * x * x - 2.0 * x + 1.0).collect();
        let fit = fit_polynomial(&single_feature(xs.clone(), ys.clone()), 3).unwrap();
        assert_eq!(fit.expr.slot_count(), fit.result.constants.len());
        let pred = evaluate(&fit.expr, &fit.result.constants, &[xs]).unwrap();
        for (p, y) in pred.iter().zip(&ys) {
            assert!((p - y).abs() < 1e-9);
        }
    }
}
