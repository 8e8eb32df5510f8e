//! Damped least squares with a numerical Jacobian. The residual function
//! owns all model knowledge; this module only sees vectors.

/// Relative scale of the central-difference step: h = scale * max(1, |c|).
pub const DIFF_STEP_SCALE: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 120,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub constants: Vec<f64>,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sse_of(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r * r).sum()
}

/// Minimizes the sum of squared residuals from `start`. The residual
/// function fills its output buffer and returns false when the point is
/// outside the model's domain; such proposals are rejected like any
/// non-decreasing step. All convergence tests are relative, so uniformly
/// rescaling the residuals cannot change the iterate path.
pub fn minimize<F>(
    mut residuals: F,
    n_residuals: usize,
    start: &[f64],
    options: &LmOptions,
) -> LmOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> bool,
{
    let k = start.len();
    let mut current = start.to_vec();
    let mut res = vec![0.0; n_residuals];

    if !residuals(&current, &mut res) {
        return LmOutcome {
            constants: current,
            sse: f64::INFINITY,
            iterations: 0,
            converged: false,
        };
    }
    let mut sse = sse_of(&res);
    if k == 0 || n_residuals == 0 {
        return LmOutcome {
            constants: current,
            sse,
            iterations: 0,
            converged: true,
        };
    }

    let mut lambda = options.initial_lambda;
    let mut proposal = vec![0.0; k];
    let mut prop_res = vec![0.0; n_residuals];

    for iteration in 1..=options.max_iterations {
        if sse == 0.0 {
            return LmOutcome {
                constants: current,
                sse,
                iterations: iteration - 1,
                converged: true,
            };
        }
        let jacobian = match numeric_jacobian(&mut residuals, &current, n_residuals) {
            Some(j) => j,
            None => {
                return LmOutcome {
                    constants: current,
                    sse,
                    iterations: iteration - 1,
                    converged: false,
                }
            }
        };

        // normal-equation pieces: JtJ and the gradient Jt*r
        let mut jtj = vec![vec![0.0; k]; k];
        let mut grad = vec![0.0; k];
        for i in 0..n_residuals {
            for a in 0..k {
                grad[a] += jacobian[i][a] * res[i];
                for b in a..k {
                    jtj[a][b] += jacobian[i][a] * jacobian[i][b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }
        let max_diag = jtj.iter().enumerate().map(|(j, row)| row[j]).fold(0.0, f64::max);
        let diag_floor = (1e-12 * max_diag).max(f64::MIN_POSITIVE);

        let mut accepted = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for (j, row) in damped.iter_mut().enumerate() {
                row[j] += lambda * jtj[j][j].max(diag_floor);
            }
            let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            let delta = match solve_linear(damped, rhs) {
                Some(d) => d,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            for j in 0..k {
                proposal[j] = current[j] + delta[j];
            }
            if residuals(&proposal, &mut prop_res) {
                let prop_sse = sse_of(&prop_res);
                if prop_sse < sse {
                    let drop = sse - prop_sse;
                    current.copy_from_slice(&proposal);
                    res.copy_from_slice(&prop_res);
                    let previous = sse;
                    sse = prop_sse;
                    lambda = (lambda / 10.0).max(1e-15);
                    accepted = true;
                    if drop <= 1e-14 * previous {
                        return LmOutcome {
                            constants: current,
                            sse,
                            iterations: iteration,
                            converged: true,
                        };
                    }
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                break;
            }
        }

        if !accepted {
            // no usable descent direction left at any damping: stationary
            return LmOutcome {
                constants: current,
                sse,
                iterations: iteration,
                converged: true,
            };
        }
    }

    LmOutcome {
        constants: current,
        sse,
        iterations: options.max_iterations,
        converged: false,
    }
}

/// Central-difference Jacobian, row i = residual i, column j = constant j.
/// None if any probe point leaves the model's domain.
pub fn numeric_jacobian<F>(
    residuals: &mut F,
    constants: &[f64],
    n_residuals: usize,
) -> Option<Vec<Vec<f64>>>
where
    F: FnMut(&[f64], &mut [f64]) -> bool,
{
    let k = constants.len();
    let mut jacobian = vec![vec![0.0; k]; n_residuals];
    let mut probe = constants.to_vec();
    let mut plus = vec![0.0; n_residuals];
    let mut minus = vec![0.0; n_residuals];
    for j in 0..k {
        let h = DIFF_STEP_SCALE * constants[j].abs().max(1.0);
        probe[j] = constants[j] + h;
        if !residuals(&probe, &mut plus) {
            return None;
        }
        probe[j] = constants[j] - h;
        if !residuals(&probe, &mut minus) {
            return None;
        }
        probe[j] = constants[j];
        for i in 0..n_residuals {
            jacobian[i][j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Some(jacobian)
}

/// Gaussian elimination with partial pivoting; None when singular.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in col + 1..n {
            acc -= a[col][c] * x[c];
        }
        x[col] = acc / a[col][col];
        if !x[col].is_finite() {
            return None;
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_known_linear_system() {
        let a = vec![
            vec![2.0, 1.0, -1.0],
            vec![-3.0, -1.0, 2.0],
            vec![-2.0, 1.0, 2.0],
        ];
        let b = vec![8.0, -11.0, -3.0];
        let x = solve_linear(a, b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
        assert!((x[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_system_is_none() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve_linear(a, vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn fits_a_line_exactly() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let out = minimize(
            |c: &[f64], r: &mut [f64]| {
                for i in 0..xs.len() {
                    r[i] = c[0] * xs[i] + c[1] - ys[i];
                }
                true
            },
            xs.len(),
            &[0.0, 0.0],
            &LmOptions::default(),
        );
        assert!(out.converged);
        assert!((out.constants[0] - 2.0).abs() < 1e-8);
        assert!((out.constants[1] - 1.0).abs() < 1e-8);
        assert!(out.sse < 1e-16);
    }

    #[test]
    fn fits_a_nonlinear_rate() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (0.5 * x).exp()).collect();
        let out = minimize(
            |c: &[f64], r: &mut [f64]| {
                for i in 0..xs.len() {
                    r[i] = (c[0] * xs[i]).exp() - ys[i];
                }
                true
            },
            xs.len(),
            &[2.0],
            &LmOptions::default(),
        );
        assert!(out.converged);
        assert!((out.constants[0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn invalid_start_reports_infinite_sse() {
        let out = minimize(
            |c: &[f64], r: &mut [f64]| {
                if c[0] < 0.0 {
                    return false;
                }
                r[0] = c[0] - 2.0;
                true
            },
            1,
            &[-1.0],
            &LmOptions::default(),
        );
        assert!(!out.converged);
        assert_eq!(out.sse, f64::INFINITY);
    }

    #[test]
    fn domain_walls_are_respected_during_descent() {
        // optimum at c = 2 with the region c < 0 forbidden; start near wall
        let out = minimize(
            |c: &[f64], r: &mut [f64]| {
                if c[0] < 0.0 {
                    return false;
                }
                r[0] = c[0] - 2.0;
                true
            },
            1,
            &[0.5],
            &LmOptions::default(),
        );
        assert!(out.converged);
        assert!((out.constants[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn jacobian_matches_analytic_linear_model() {
        let xs = [0.5, 1.5, 2.5];
        let mut f = |c: &[f64], r: &mut [f64]| {
            for i in 0..xs.len() {
                r[i] = c[0] * xs[i] + c[1];
            }
            true
        };
        let j = numeric_jacobian(&mut f, &[1.3, -0.2], xs.len()).unwrap();
        for i in 0..xs.len() {
            assert!((j[i][0] - xs[i]).abs() < 1e-7);
            assert!((j[i][1] - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_residual_start_converges_immediately() {
        let out = minimize(
            |c: &[f64], r: &mut [f64]| {
                r[0] = c[0] - 1.0;
                true
            },
            1,
            &[1.0],
            &LmOptions::default(),
        );
        assert!(out.converged);
        assert_eq!(out.sse, 0.0);
    }
}
