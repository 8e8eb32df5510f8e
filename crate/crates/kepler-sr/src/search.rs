//! The search loop: enumerate, fit, snap, score, keep the Pareto survivors.

use std::time::Instant;

use rayon::prelude::*;

use crate::dataset::FeatureMatrix;
use crate::enumerate::enumerate_candidates;
use crate::expr::print::to_text;
use crate::expr::{complexity_with_snaps, evaluate, Expr};
use crate::fit::{fit_constants, fit_polynomial, DEFAULT_RESTARTS};
use crate::loss::{dl_loss, mse_loss};
use crate::pareto::{LossKey, ParetoFront, ScoredExpr};
use crate::BiasConfig;

/// Largest numerator/denominator a constant may snap to.
pub const SNAP_MAX_RATIONAL: i64 = 9;
/// Relative deviation under which a constant snaps to a rational.
pub const SNAP_RELATIVE_TOLERANCE: f64 = 1e-4;
/// Magnitude under which a constant snaps to exactly zero.
pub const SNAP_ZERO_TOLERANCE: f64 = 1e-12;

/// Replaces fitted constants that sit within `SNAP_RELATIVE_TOLERANCE` of a
/// small rational p/q (|p|, q <= 9) by that rational, in place. Returns the
/// per-slot snap flags used for complexity accounting.
pub fn snap_rationals(constants: &mut [f64]) -> Vec<bool> {
    constants
        .iter_mut()
        .map(|c| {
            if c.abs() <= SNAP_ZERO_TOLERANCE {
                *c = 0.0;
                return true;
            }
            if !c.is_finite() {
                return false;
            }
            let mut best: Option<(f64, f64)> = None;
            for q in 1..=SNAP_MAX_RATIONAL {
                let p = (*c * q as f64).round().clamp(-(SNAP_MAX_RATIONAL as f64), SNAP_MAX_RATIONAL as f64);
                let value = p / q as f64;
                let deviation = (*c - value).abs();
                if best.map_or(true, |(d, _)| deviation < d) {
                    best = Some((deviation, value));
                }
            }
            match best {
                Some((deviation, value)) if deviation < SNAP_RELATIVE_TOLERANCE * c.abs() => {
                    *c = value;
                    true
                }
                _ => false,
            }
        })
        .collect()
}

/// How a search run came to an end. Running out of budget is a normal
/// completion, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Every admissible candidate was scored.
    StreamComplete,
    CandidateLimit,
    /// Wall-clock cutoff; the only stop that is not reproducible.
    TimeLimit,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SearchBudget {
    pub max_bits: f64,
    pub max_candidates: usize,
    pub max_seconds: f64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_bits: 40.0,
            max_candidates: 200_000,
            max_seconds: 600.0,
        }
    }
}

/// One line of the audit log: every scored candidate, in scoring order.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AuditRecord {
    pub expr: String,
    pub bits: f64,
    pub mse: f64,
    pub dl: f64,
    pub accepted: bool,
}

#[derive(Debug)]
pub struct SearchOutcome {
    pub front: ParetoFront,
    pub audit: Vec<AuditRecord>,
    pub candidates_scored: usize,
    pub stop: StopReason,
}

/// Candidates per parallel scoring batch. Batches are scored in parallel
/// but folded into the front in enumeration order, so the outcome does not
/// depend on the thread count.
const BATCH_SIZE: usize = 1024;

pub fn run_search(
    data: &FeatureMatrix,
    bias: BiasConfig,
    budget: &SearchBudget,
    loss_key: LossKey,
) -> SearchOutcome {
    assert_eq!(
        data.arity(),
        bias.feature_arity(),
        "feature matrix was not built for this bias configuration"
    );
    let grammar = bias.grammar();
    let arity = data.arity();
    let start = Instant::now();
    let mut front = ParetoFront::new(loss_key);
    let mut audit = Vec::new();
    let mut scored = 0usize;

    // Polynomial seeds: cheap closed-form fits that give the front sane
    // low-accuracy members before the enumeration starts.
    for degree in 0..=3 {
        if scored >= budget.max_candidates {
            return finish(front, audit, scored, StopReason::CandidateLimit);
        }
        if let Ok(poly) = fit_polynomial(data, degree) {
            let candidate = rescore(poly.expr, poly.result.constants, data, &grammar, arity);
            scored += 1;
            admit(&mut front, &mut audit, candidate);
        }
    }

    let mut stream = enumerate_candidates(&grammar, arity, budget.max_bits);
    loop {
        if start.elapsed().as_secs_f64() > budget.max_seconds {
            return finish(front, audit, scored, StopReason::TimeLimit);
        }
        let room = budget.max_candidates - scored;
        if room == 0 {
            return finish(front, audit, scored, StopReason::CandidateLimit);
        }
        let batch: Vec<Expr> = stream.by_ref().take(room.min(BATCH_SIZE)).collect();
        if batch.is_empty() {
            return finish(front, audit, scored, StopReason::StreamComplete);
        }
        let results: Vec<ScoredExpr> = batch
            .into_par_iter()
            .map(|expr| {
                let fitted = fit_constants(&expr, data, DEFAULT_RESTARTS);
                rescore(expr, fitted.constants, data, &grammar, arity)
            })
            .collect();
        for candidate in results {
            scored += 1;
            admit(&mut front, &mut audit, candidate);
        }
    }
}

/// Snaps constants, then recomputes both losses from scratch so the scores
/// always describe the constants actually reported.
fn rescore(
    expr: Expr,
    mut constants: Vec<f64>,
    data: &FeatureMatrix,
    grammar: &crate::expr::GrammarSet,
    arity: usize,
) -> ScoredExpr {
    let snapped = snap_rationals(&mut constants);
    let (mse, dl) = match evaluate(&expr, &constants, &data.columns) {
        Ok(preds) => (mse_loss(&preds, &data.target), dl_loss(&preds, &data.target)),
        Err(_) => (f64::INFINITY, f64::INFINITY),
    };
    let complexity = complexity_with_snaps(&expr, grammar, arity, &snapped).bits;
    ScoredExpr {
        expr,
        constants,
        complexity,
        mse,
        dl,
    }
}

fn admit(front: &mut ParetoFront, audit: &mut Vec<AuditRecord>, candidate: ScoredExpr) {
    let record = AuditRecord {
        expr: to_text(&candidate.expr, &candidate.constants),
        bits: candidate.complexity,
        mse: candidate.mse,
        dl: candidate.dl,
        accepted: false,
    };
    audit.push(record);
    let accepted = front.insert(candidate);
    audit.last_mut().expect("just pushed").accepted = accepted;
}

fn finish(
    front: ParetoFront,
    audit: Vec<AuditRecord>,
    candidates_scored: usize,
    stop: StopReason,
) -> SearchOutcome {
    SearchOutcome {
        front,
        audit,
        candidates_scored,
        stop,
    }
}
