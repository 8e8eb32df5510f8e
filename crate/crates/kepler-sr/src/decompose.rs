//! Additive/multiplicative separability detection on two-feature problems,
//! and the recursive split into two single-feature searches.
//!
//! Detection works on a table of function values over a rectangular lattice.
//! When the samples already form a grid the table is exact; otherwise values
//! come from an inverse-distance surrogate, and only lattice cells whose
//! corners are both inside the sample hull and close to real samples are
//! trusted. Data on a lower-dimensional manifold (the cos/sin unit circle)
//! leaves no trusted cell, which downgrades the test to a "none" verdict
//! rather than an error: the pipeline then proceeds to the flat search.

use crate::dataset::FeatureMatrix;
use crate::expr::{BinaryOp, Expr};
use crate::fit::fit_constants_from;
use crate::loss::mse_loss;
use crate::pareto::LossKey;
use crate::search::{run_search, SearchBudget};
use crate::BiasConfig;

/// Normalized violation below which a separability kind is assigned.
pub const SEPARABILITY_THRESHOLD: f64 = 1e-3;
/// Fewest samples the surrogate is willing to work from.
pub const MIN_SAMPLES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeparabilityKind {
    None,
    Additive,
    Multiplicative,
}

/// Outcome of the separability probe. `score` is the largest normalized
/// mixed second difference seen for the reported kind (for `None`, the
/// smaller of the two violations, or infinity when no cell was trustable).
#[derive(Debug)]
pub struct SeparabilityReport {
    pub kind: SeparabilityKind,
    pub score: f64,
    pub split: Option<(FeatureMatrix, FeatureMatrix)>,
}

#[derive(Debug, thiserror::Error)]
pub enum DecomposeError {
    #[error("separability needs at least {MIN_SAMPLES} samples, got {rows}")]
    InsufficientData { rows: usize },
    #[error("single-feature sub-search returned an empty front")]
    EmptySubSearch,
}

/// Tests a two-feature sample cloud for additive or multiplicative
/// structure: f is additive when the mixed second difference of f vanishes
/// over the lattice, multiplicative when the same holds for log|f| with f
/// bounded away from zero.
pub fn test_separability(data: &FeatureMatrix) -> Result<SeparabilityReport, DecomposeError> {
    assert_eq!(data.arity(), 2, "separability is a two-feature question");
    if data.rows() < MIN_SAMPLES {
        return Err(DecomposeError::InsufficientData { rows: data.rows() });
    }

    let table = match as_grid(data) {
        Some(grid) => grid,
        None => surrogate_lattice(data),
    };
    let Some(scores) = score_table(&table) else {
        // No trusted probe cell: nothing to say, so say none.
        return Ok(SeparabilityReport {
            kind: SeparabilityKind::None,
            score: f64::INFINITY,
            split: None,
        });
    };

    if scores.additive < SEPARABILITY_THRESHOLD {
        let split = build_split(data, &table, scores.pivot, false);
        return Ok(SeparabilityReport {
            kind: SeparabilityKind::Additive,
            score: scores.additive,
            split: Some(split),
        });
    }
    if scores.multiplicative < SEPARABILITY_THRESHOLD {
        let split = build_split(data, &table, scores.pivot, true);
        return Ok(SeparabilityReport {
            kind: SeparabilityKind::Multiplicative,
            score: scores.multiplicative,
            split: Some(split),
        });
    }
    Ok(SeparabilityReport {
        kind: SeparabilityKind::None,
        score: scores.additive.min(scores.multiplicative),
        split: None,
    })
}

/// The composed result of solving both halves of a split.
#[derive(Debug)]
pub struct ComposedFit {
    pub expr: Expr,
    pub constants: Vec<f64>,
    /// End-to-end mse on the original data after the joint refit.
    pub mse: f64,
    /// End-to-end mse of the raw composition, before refitting.
    pub composed_mse: f64,
}

/// Solves each half of a split with a single-feature search and composes
/// the best members with + or ×. The composition is rescored end to end on
/// the original two-feature data, then all constants are refit jointly from
/// the composed values, so the reported mse never exceeds the raw
/// composition's.
pub fn recurse_split(
    report: &SeparabilityReport,
    original: &FeatureMatrix,
    inductive: bool,
    budget: &SearchBudget,
    loss_key: LossKey,
) -> Result<ComposedFit, DecomposeError> {
    assert!(
        report.kind != SeparabilityKind::None,
        "recurse_split is only defined for separable reports"
    );
    let (g_data, h_data) = report.split.as_ref().expect("separable reports carry a split");
    let bias = BiasConfig {
        observational: false,
        inductive,
    };
    let g_best = run_search(g_data, bias, budget, loss_key)
        .front
        .best()
        .cloned()
        .ok_or(DecomposeError::EmptySubSearch)?;
    let h_best = run_search(h_data, bias, budget, loss_key)
        .front
        .best()
        .cloned()
        .ok_or(DecomposeError::EmptySubSearch)?;

    let op = match report.kind {
        SeparabilityKind::Additive => BinaryOp::Add,
        SeparabilityKind::Multiplicative => BinaryOp::Mul,
        SeparabilityKind::None => unreachable!(),
    };
    let h_expr = retarget_feature(&shift_slots(&h_best.expr, g_best.expr.slot_count()), 1);
    let expr = Expr::binary(op, g_best.expr.clone(), h_expr);
    let mut constants = g_best.constants.clone();
    constants.extend_from_slice(&h_best.constants);

    let composed_mse = match crate::expr::evaluate(&expr, &constants, &original.columns) {
        Ok(preds) => mse_loss(&preds, &original.target),
        Err(_) => f64::INFINITY,
    };
    let refit = fit_constants_from(&expr, original, &constants);
    if refit.mse <= composed_mse {
        Ok(ComposedFit {
            expr,
            constants: refit.constants,
            mse: refit.mse,
            composed_mse,
        })
    } else {
        Ok(ComposedFit {
            expr,
            constants,
            mse: composed_mse,
            composed_mse,
        })
    }
}

/// Function values over a rectangular lattice, with a trust mask.
struct ValueTable {
    x0s: Vec<f64>,
    x1s: Vec<f64>,
    values: Vec<Vec<f64>>,
    trusted: Vec<Vec<bool>>,
}

struct TableScores {
    additive: f64,
    multiplicative: f64,
    /// Top-left corner of the first fully trusted 2x2 block; the split
    /// slices run through it so they always exist.
    pivot: (usize, usize),
}

/// Reads the samples back as a complete grid, if they are one.
fn as_grid(data: &FeatureMatrix) -> Option<ValueTable> {
    let x0s = cluster_values(&data.columns[0]);
    let x1s = cluster_values(&data.columns[1]);
    if x0s.len() < 2 || x1s.len() < 2 || x0s.len() * x1s.len() != data.rows() {
        return None;
    }
    let mut values = vec![vec![f64::NAN; x1s.len()]; x0s.len()];
    let mut filled = vec![vec![false; x1s.len()]; x0s.len()];
    for row in 0..data.rows() {
        let i = locate(&x0s, data.columns[0][row])?;
        let j = locate(&x1s, data.columns[1][row])?;
        if filled[i][j] {
            return None;
        }
        filled[i][j] = true;
        values[i][j] = data.target[row];
    }
    if !filled.iter().all(|r| r.iter().all(|&f| f)) {
        return None;
    }
    let trusted = vec![vec![true; x1s.len()]; x0s.len()];
    Some(ValueTable {
        x0s,
        x1s,
        values,
        trusted,
    })
}

/// Distinct values up to a relative tolerance, sorted.
fn cluster_values(column: &[f64]) -> Vec<f64> {
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
    let span = sorted.last().unwrap() - sorted.first().unwrap();
    let tol = 1e-9 * span.max(1e-300);
    let mut out: Vec<f64> = Vec::new();
    for v in sorted {
        if out.last().map_or(true, |&u| v - u > tol) {
            out.push(v);
        }
    }
    out
}

fn locate(values: &[f64], v: f64) -> Option<usize> {
    let span = values.last().unwrap() - values.first().unwrap();
    let tol = 1e-9 * span.max(1e-300);
    let at = values.partition_point(|&u| u < v - tol);
    (at < values.len() && (values[at] - v).abs() <= tol).then_some(at)
}

/// Builds an 8x8 lattice over the sample bounding box and fills it from an
/// inverse-distance surrogate. A node is trusted only inside the convex
/// hull of the samples and within three median nearest-neighbour spacings
/// of a real sample, so the surrogate is never probed where it would be
/// extrapolating.
fn surrogate_lattice(data: &FeatureMatrix) -> ValueTable {
    const NODES: usize = 8;
    let n = data.rows();
    let (min0, span0) = axis_range(&data.columns[0]);
    let (min1, span1) = axis_range(&data.columns[1]);
    let norm: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            (
                (data.columns[0][i] - min0) / span0,
                (data.columns[1][i] - min1) / span1,
            )
        })
        .collect();

    let mut nn = Vec::with_capacity(n);
    for (i, p) in norm.iter().enumerate() {
        let mut best = f64::INFINITY;
        for (j, q) in norm.iter().enumerate() {
            if i != j {
                best = best.min(dist2(*p, *q));
            }
        }
        nn.push(best.sqrt());
    }
    nn.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let trust_radius = 3.0 * nn[nn.len() / 2];
    let hull = convex_hull(&norm);

    let mut x0s = Vec::with_capacity(NODES);
    let mut x1s = Vec::with_capacity(NODES);
    let mut nodes0 = Vec::with_capacity(NODES);
    let mut nodes1 = Vec::with_capacity(NODES);
    for k in 0..NODES {
        let t = 0.05 + 0.9 * k as f64 / (NODES - 1) as f64;
        nodes0.push(t);
        nodes1.push(t);
        x0s.push(min0 + t * span0);
        x1s.push(min1 + t * span1);
    }

    let mut values = vec![vec![f64::NAN; NODES]; NODES];
    let mut trusted = vec![vec![false; NODES]; NODES];
    for (i, &u) in nodes0.iter().enumerate() {
        for (j, &v) in nodes1.iter().enumerate() {
            let p = (u, v);
            let near = norm.iter().any(|q| dist2(p, *q) <= trust_radius * trust_radius);
            if !(near && inside_hull(&hull, p)) {
                continue;
            }
            trusted[i][j] = true;
            values[i][j] = idw(&norm, &data.target, p);
        }
    }
    ValueTable {
        x0s,
        x1s,
        values,
        trusted,
    }
}

fn axis_range(column: &[f64]) -> (f64, f64) {
    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
    let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, (max - min).max(1e-300))
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}

/// Inverse-square-distance weighting, exact on sample hits.
fn idw(points: &[(f64, f64)], targets: &[f64], p: (f64, f64)) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (q, &t) in points.iter().zip(targets) {
        let d2 = dist2(p, *q);
        if d2 < 1e-24 {
            return t;
        }
        let w = 1.0 / d2;
        num += w * t;
        den += w;
    }
    num / den
}

/// Andrew's monotone chain; returns the hull counterclockwise.
fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Strict interior test against a counterclockwise hull.
fn inside_hull(hull: &[(f64, f64)], p: (f64, f64)) -> bool {
    if hull.len() < 3 {
        return false;
    }
    hull.iter()
        .zip(hull.iter().cycle().skip(1))
        .all(|(&a, &b)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) > 1e-12)
}

/// Mixed second differences over every fully trusted 2x2 block, normalized
/// by the value spread; None when no block is trusted.
fn score_table(table: &ValueTable) -> Option<TableScores> {
    let rows = table.values.len();
    let cols = table.values[0].len();
    let mut additive: f64 = 0.0;
    let mut multiplicative: f64 = 0.0;
    let mut pivot = None;

    let mut fmin = f64::INFINITY;
    let mut fmax = f64::NEG_INFINITY;
    let mut fabs_min = f64::INFINITY;
    let mut fabs_max: f64 = 0.0;
    let mut gmin = f64::INFINITY;
    let mut gmax = f64::NEG_INFINITY;
    for i in 0..rows {
        for j in 0..cols {
            if table.trusted[i][j] {
                let f = table.values[i][j];
                fmin = fmin.min(f);
                fmax = fmax.max(f);
                fabs_min = fabs_min.min(f.abs());
                fabs_max = fabs_max.max(f.abs());
                if f != 0.0 {
                    gmin = gmin.min(f.abs().ln());
                    gmax = gmax.max(f.abs().ln());
                }
            }
        }
    }
    let f_scale = (fmax - fmin).max(1e-300);
    let g_scale = (gmax - gmin).max(1e-300);
    // log|f| is only meaningful with f bounded away from zero.
    let log_ok = fabs_min > 1e-9 * fabs_max;

    for i in 0..rows.saturating_sub(1) {
        for j in 0..cols.saturating_sub(1) {
            let ok = table.trusted[i][j]
                && table.trusted[i + 1][j]
                && table.trusted[i][j + 1]
                && table.trusted[i + 1][j + 1];
            if !ok {
                continue;
            }
            pivot.get_or_insert((i, j));
            let f00 = table.values[i][j];
            let f01 = table.values[i][j + 1];
            let f10 = table.values[i + 1][j];
            let f11 = table.values[i + 1][j + 1];
            additive = additive.max((f11 - f10 - f01 + f00).abs() / f_scale);
            if log_ok {
                let d = f11.abs().ln() - f10.abs().ln() - f01.abs().ln() + f00.abs().ln();
                multiplicative = multiplicative.max(d.abs() / g_scale);
            }
        }
    }
    let pivot = pivot?;
    if !log_ok {
        multiplicative = f64::INFINITY;
    }
    Some(TableScores {
        additive,
        multiplicative,
        pivot,
    })
}

/// Single-feature sub-datasets through the pivot block's corner: the g half
/// keeps the table's x1 = pivot column slice, the h half keeps the x0 =
/// pivot row slice with the pivot value subtracted (additive) or divided
/// out (multiplicative), so g + h or g * h reproduces the table.
fn build_split(
    data: &FeatureMatrix,
    table: &ValueTable,
    pivot: (usize, usize),
    multiplicative: bool,
) -> (FeatureMatrix, FeatureMatrix) {
    let (pi, pj) = pivot;
    let pivot_value = table.values[pi][pj];

    let mut g_x = Vec::new();
    let mut g_y = Vec::new();
    for i in 0..table.values.len() {
        if table.trusted[i][pj] {
            g_x.push(table.x0s[i]);
            g_y.push(table.values[i][pj]);
        }
    }
    let mut h_x = Vec::new();
    let mut h_y = Vec::new();
    for j in 0..table.values[0].len() {
        if table.trusted[pi][j] {
            h_x.push(table.x1s[j]);
            h_y.push(if multiplicative {
                table.values[pi][j] / pivot_value
            } else {
                table.values[pi][j] - pivot_value
            });
        }
    }
    (
        FeatureMatrix {
            names: vec![data.names[0].clone()],
            columns: vec![g_x],
            target: g_y,
        },
        FeatureMatrix {
            names: vec![data.names[1].clone()],
            columns: vec![h_x],
            target: h_y,
        },
    )
}

fn shift_slots(e: &Expr, offset: usize) -> Expr {
    match e {
        Expr::Constant(i) => Expr::Constant(i + offset),
        Expr::Feature(i) => Expr::Feature(*i),
        Expr::Unary(op, c) => Expr::Unary(*op, Box::new(shift_slots(c, offset))),
        Expr::Binary(op, l, r) => Expr::Binary(
            *op,
            Box::new(shift_slots(l, offset)),
            Box::new(shift_slots(r, offset)),
        ),
    }
}

/// Rewrites every feature reference to the given index; sub-searches see
/// their variable as x0 but the composition reads x1 for the second half.
fn retarget_feature(e: &Expr, index: usize) -> Expr {
    match e {
        Expr::Constant(i) => Expr::Constant(*i),
        Expr::Feature(_) => Expr::Feature(index),
        Expr::Unary(op, c) => Expr::Unary(*op, Box::new(retarget_feature(c, index))),
        Expr::Binary(op, l, r) => Expr::Binary(
            *op,
            Box::new(retarget_feature(l, index)),
            Box::new(retarget_feature(r, index)),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{featurize, load_dataset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::path::Path;

    fn grid_data(f: impl Fn(f64, f64) -> f64) -> FeatureMatrix {
        let mut columns = vec![Vec::new(), Vec::new()];
        let mut target = Vec::new();
        for i in 0..12 {
            for j in 0..10 {
                let x0 = -2.0 + 4.0 * i as f64 / 11.0;
                let x1 = 1.0 + 2.0 * j as f64 / 9.0;
                columns[0].push(x0);
                columns[1].push(x1);
                target.push(f(x0, x1));
            }
        }
        FeatureMatrix {
            names: vec!["x0".into(), "x1".into()],
            columns,
            target,
        }
    }

    #[test]
    fn additive_grid_is_detected_exactly() {
        let data = grid_data(|x0, x1| x0.sin() + 1.0 / x1);
        let report = test_separability(&data).unwrap();
        assert_eq!(report.kind, SeparabilityKind::Additive);
        assert!(report.score < 1e-6, "score {}", report.score);
        let (g, h) = report.split.as_ref().unwrap();
        assert_eq!(g.arity(), 1);
        assert_eq!(h.arity(), 1);
        // The g slice is sin(x0) up to a constant offset.
        let offset = g.target[0] - g.columns[0][0].sin();
        for (x, y) in g.columns[0].iter().zip(&g.target) {
            assert!((y - (x.sin() + offset)).abs() < 1e-12);
        }
    }

    #[test]
    fn multiplicative_grid_is_detected_exactly() {
        let data = grid_data(|x0, x1| x0.cos() * (1.0 / x1));
        let report = test_separability(&data).unwrap();
        assert_eq!(report.kind, SeparabilityKind::Multiplicative);
        assert!(report.score < 1e-6, "score {}", report.score);
        assert!(report.split.is_some());
    }

    #[test]
    fn entangled_grid_reports_none() {
        let data = grid_data(|x0, x1| (x0 * x1).sin());
        let report = test_separability(&data).unwrap();
        assert_eq!(report.kind, SeparabilityKind::None);
        assert!(report.score.is_finite());
        assert!(report.score >= SEPARABILITY_THRESHOLD);
        assert!(report.split.is_none());
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let mut data = grid_data(|x0, x1| x0 + x1);
        data.columns[0].truncate(20);
        data.columns[1].truncate(20);
        data.target.truncate(20);
        assert!(matches!(
            test_separability(&data),
            Err(DecomposeError::InsufficientData { rows: 20 })
        ));
    }

    #[test]
    fn unit_circle_features_report_none() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/rudolphine_mars.csv");
        let dataset = load_dataset(Path::new(path)).unwrap();
        let features = featurize(&dataset, BiasConfig::for_experiment(2).unwrap());
        let report = test_separability(&features).unwrap();
        assert_eq!(report.kind, SeparabilityKind::None);
        assert!(report.split.is_none());
        // The data sits on the cos^2 + sin^2 = 1 curve, so no probe cell
        // is trusted and the score reports no evidence at all.
        assert!(report.score.is_infinite());
    }

    #[test]
    fn scattered_entangled_cloud_reports_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut columns = vec![Vec::new(), Vec::new()];
        let mut target = Vec::new();
        for _ in 0..400 {
            let x0: f64 = rng.gen_range(-2.0..2.0);
            let x1: f64 = rng.gen_range(1.0..3.0);
            columns[0].push(x0);
            columns[1].push(x1);
            target.push((x0 * x1).sin());
        }
        let data = FeatureMatrix {
            names: vec!["x0".into(), "x1".into()],
            columns,
            target,
        };
        let report = test_separability(&data).unwrap();
        assert_eq!(report.kind, SeparabilityKind::None);
        // Dense cloud: the lattice must actually have been probed.
        assert!(report.score.is_finite());
    }

    fn sub_budget() -> SearchBudget {
        SearchBudget {
            max_bits: 40.0,
            max_candidates: 3_000,
            max_seconds: 600.0,
        }
    }

    #[test]
    fn additive_split_recomposes_to_machine_precision() {
        let data = grid_data(|x0, x1| x0.sin() + 1.0 / x1);
        let report = test_separability(&data).unwrap();
        let composed = recurse_split(&report, &data, false, &sub_budget(), LossKey::Dl).unwrap();
        assert!(
            composed.mse < 1e-10,
            "composed fit too loose: {:e}",
            composed.mse
        );
        assert!(composed.mse <= composed.composed_mse);
        assert!(matches!(composed.expr, Expr::Binary(BinaryOp::Add, _, _)));
        assert!(composed.expr.contains_feature());
        assert_eq!(composed.expr.max_feature_index(), Some(1));
    }

    #[test]
    fn multiplicative_split_recomposes_to_machine_precision() {
        let data = grid_data(|x0, x1| x0.cos() * (1.0 / x1));
        let report = test_separability(&data).unwrap();
        let composed = recurse_split(&report, &data, true, &sub_budget(), LossKey::Dl).unwrap();
        assert!(
            composed.mse < 1e-10,
            "composed fit too loose: {:e}",
            composed.mse
        );
        assert!(composed.mse <= composed.composed_mse);
        assert!(matches!(composed.expr, Expr::Binary(BinaryOp::Mul, _, _)));
        assert_eq!(composed.expr.max_feature_index(), Some(1));
    }
}
