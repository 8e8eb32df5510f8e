//! Exhaustive enumeration of expression trees, smallest first.
//!
//! The stream is lazy, deterministic, and yields each canonical form exactly
//! once. Within a node-count layer the order is: leaves (features, then the
//! constant), unary-rooted trees grouped by operator, then binary-rooted
//! trees grouped by operator and child-size split. Uniqueness comes from
//! construction rather than a post-hoc filter:
//!
//! - commutative children are emitted with the smaller operand (by size,
//!   then by position in its layer) on the left, so each unordered pair
//!   appears once;
//! - subtrees built entirely from constants fold to a single constant, so
//!   only the bare constant leaf is ever constant-valued;
//! - negate-of-negate and inverse-of-inverse collapse to their grandchild
//!   and are skipped;
//! - constant slots are numbered in reading order at construction time.

use crate::expr::{BinaryOp, Expr, GrammarSet, UnaryOp};

/// Lazy iterator over all admissible trees. Admission is by structural
/// bits: node_count * log2(symbol_count) <= max_bits. The 30-bit constant
/// surcharge is a scoring cost, not an admission cost, so forms with two
/// or three constants stay reachable at desk-scale budgets.
pub struct CandidateStream {
    unary_ops: Vec<UnaryOp>,
    binary_ops: Vec<BinaryOp>,
    arity: usize,
    max_constants: usize,
    max_layer: usize,
    /// layers[k] holds every tree of k+1 nodes yielded so far; later layers
    /// draw their children from these.
    layers: Vec<Vec<Expr>>,
    layer: usize,
    phase: Phase,
}

enum Phase {
    Leaves { next: usize },
    Unary { op: usize, child: usize },
    Binary { op: usize, split: usize, left: usize, right: usize },
}

pub fn enumerate_candidates(grammar: &GrammarSet, arity: usize, max_bits: f64) -> CandidateStream {
    assert!(arity == 1 || arity == 2, "feature arity must be 1 or 2");
    let per_node = (grammar.symbol_count(arity) as f64).log2();
    let mut max_layer = 0;
    while (max_layer + 1) as f64 * per_node <= max_bits && max_layer + 1 <= grammar.max_nodes {
        max_layer += 1;
    }
    CandidateStream {
        unary_ops: grammar.unary.clone(),
        binary_ops: grammar.binary.clone(),
        arity,
        max_constants: grammar.max_constants,
        max_layer,
        layers: vec![Vec::new(); max_layer],
        layer: 1,
        phase: Phase::Leaves { next: 0 },
    }
}

impl Iterator for CandidateStream {
    type Item = Expr;

    fn next(&mut self) -> Option<Expr> {
        while self.layer <= self.max_layer {
            if let Some(expr) = self.step() {
                self.layers[self.layer - 1].push(expr.clone());
                return Some(expr);
            }
        }
        None
    }
}

impl CandidateStream {
    /// Advances the cursor one position; Some if that position yields a
    /// tree, None if it was pruned or rolled over to the next block.
    fn step(&mut self) -> Option<Expr> {
        match self.phase {
            Phase::Leaves { next } => {
                if self.layer != 1 || next > self.arity {
                    self.enter_unary();
                    return None;
                }
                self.phase = Phase::Leaves { next: next + 1 };
                if next < self.arity {
                    Some(Expr::Feature(next))
                } else {
                    Some(Expr::Constant(0))
                }
            }
            Phase::Unary { op, child } => {
                if self.layer < 2 || op >= self.unary_ops.len() {
                    self.phase = Phase::Binary { op: 0, split: 0, left: 0, right: 0 };
                    return None;
                }
                let children = &self.layers[self.layer - 2];
                if child >= children.len() {
                    self.phase = Phase::Unary { op: op + 1, child: 0 };
                    return None;
                }
                self.phase = Phase::Unary { op, child: child + 1 };
                let operator = self.unary_ops[op];
                let operand = &children[child];
                if matches!(operand, Expr::Constant(_)) {
                    return None;
                }
                let cancels = match (operator, operand) {
                    (UnaryOp::Negate, Expr::Unary(UnaryOp::Negate, _)) => true,
                    (UnaryOp::Inverse, Expr::Unary(UnaryOp::Inverse, _)) => true,
                    _ => false,
                };
                if cancels {
                    return None;
                }
                Some(Expr::unary(operator, operand.clone()))
            }
            Phase::Binary { op, split, left, right } => {
                if self.layer < 3 || op >= self.binary_ops.len() {
                    self.layer += 1;
                    self.phase = if self.layer == 1 {
                        Phase::Leaves { next: 0 }
                    } else {
                        Phase::Unary { op: 0, child: 0 }
                    };
                    return None;
                }
                let operator = self.binary_ops[op];
                let (i, j) = match self.split_sizes(operator, split) {
                    Some(sizes) => sizes,
                    None => {
                        self.phase = Phase::Binary { op: op + 1, split: 0, left: 0, right: 0 };
                        return None;
                    }
                };
                if left >= self.layers[i - 1].len() {
                    self.phase = Phase::Binary { op, split: split + 1, left: 0, right: 0 };
                    return None;
                }
                let right_start = if operator.is_commutative() && i == j { left } else { 0 };
                let right = right.max(right_start);
                if right >= self.layers[j - 1].len() {
                    let left = left + 1;
                    let right = if operator.is_commutative() && i == j { left } else { 0 };
                    self.phase = Phase::Binary { op, split, left, right };
                    return None;
                }
                self.phase = Phase::Binary { op, split, left, right: right + 1 };
                let l = &self.layers[i - 1][left];
                let r = &self.layers[j - 1][right];
                if matches!(l, Expr::Constant(_)) && matches!(r, Expr::Constant(_)) {
                    return None;
                }
                let l_slots = l.slot_count();
                if l_slots + r.slot_count() > self.max_constants {
                    return None;
                }
                Some(Expr::binary(operator, l.clone(), shift_slots(r, l_slots)))
            }
        }
    }

    fn enter_unary(&mut self) {
        self.layer += 1;
        self.phase = Phase::Unary { op: 0, child: 0 };
    }

    /// Child sizes for the split-th way of dividing layer-1 nodes between
    /// two children. Commutative operators only see i <= j.
    fn split_sizes(&self, op: BinaryOp, split: usize) -> Option<(usize, usize)> {
        let budget = self.layer - 1;
        let i = split + 1;
        let j = budget.checked_sub(i)?;
        if j < 1 {
            return None;
        }
        if op.is_commutative() && i > j {
            return None;
        }
        Some((i, j))
    }
}

fn shift_slots(e: &Expr, offset: usize) -> Expr {
    if offset == 0 {
        return e.clone();
    }
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
