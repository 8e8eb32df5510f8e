//! Expression trees for candidate equations: evaluation, complexity
//! scoring, canonical ordering, and the text format used in reports.

pub mod canon;
pub mod parse;
pub mod print;

/// Unary operators. Declaration order fixes both the canonical ordering of
/// trees and the enumeration order of candidate blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnaryOp {
    Sin,
    Cos,
    ArcSin,
    ArcCos,
    Tan,
    ArcTan,
    Sqrt,
    Square,
    Cube,
    Inverse,
    Negate,
    Exp,
    Log,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 13] = [
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::ArcSin,
        UnaryOp::ArcCos,
        UnaryOp::Tan,
        UnaryOp::ArcTan,
        UnaryOp::Sqrt,
        UnaryOp::Square,
        UnaryOp::Cube,
        UnaryOp::Inverse,
        UnaryOp::Negate,
        UnaryOp::Exp,
        UnaryOp::Log,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::ArcSin => "asin",
            UnaryOp::ArcCos => "acos",
            UnaryOp::Tan => "tan",
            UnaryOp::ArcTan => "atan",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Square => "square",
            UnaryOp::Cube => "cube",
            UnaryOp::Inverse => "inv",
            UnaryOp::Negate => "neg",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
        }
    }
}

/// Binary operators, in enumeration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 5] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Pow,
    ];

    pub fn is_commutative(self) -> bool {
        matches!(self, BinaryOp::Add | BinaryOp::Mul)
    }
}

/// Immutable candidate-equation tree. Constants are slot references into a
/// separate value vector so the same shape can be refit on any dataset.
///
/// Variant declaration order defines the total order used for canonical
/// commutative-operand sorting: constants sort before features, features
/// before unary applications, those before binary ones.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Constant(usize),
    Feature(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn unary(op: UnaryOp, child: Expr) -> Expr {
        Expr::Unary(op, Box::new(child))
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Constant(_) | Expr::Feature(_) => 1,
            Expr::Unary(_, c) => 1 + c.node_count(),
            Expr::Binary(_, l, r) => 1 + l.node_count() + r.node_count(),
        }
    }

    /// Number of constant slots, assuming contiguous numbering 0..k.
    pub fn slot_count(&self) -> usize {
        fn max_slot(e: &Expr, acc: &mut Option<usize>) {
            match e {
                Expr::Constant(i) => *acc = Some(acc.map_or(*i, |a| a.max(*i))),
                Expr::Feature(_) => {}
                Expr::Unary(_, c) => max_slot(c, acc),
                Expr::Binary(_, l, r) => {
                    max_slot(l, acc);
                    max_slot(r, acc);
                }
            }
        }
        let mut acc = None;
        max_slot(self, &mut acc);
        acc.map_or(0, |m| m + 1)
    }

    pub fn contains_feature(&self) -> bool {
        match self {
            Expr::Constant(_) => false,
            Expr::Feature(_) => true,
            Expr::Unary(_, c) => c.contains_feature(),
            Expr::Binary(_, l, r) => l.contains_feature() || r.contains_feature(),
        }
    }

    pub fn max_feature_index(&self) -> Option<usize> {
        match self {
            Expr::Constant(_) => None,
            Expr::Feature(i) => Some(*i),
            Expr::Unary(_, c) => c.max_feature_index(),
            Expr::Binary(_, l, r) => match (l.max_feature_index(), r.max_feature_index()) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
        }
    }

    /// Renumbers constant slots left to right, in reading order.
    pub fn renumber_slots(&self) -> Expr {
        fn go(e: &Expr, next: &mut usize) -> Expr {
            match e {
                Expr::Constant(_) => {
                    let slot = *next;
                    *next += 1;
                    Expr::Constant(slot)
                }
                Expr::Feature(i) => Expr::Feature(*i),
                Expr::Unary(op, c) => Expr::Unary(*op, Box::new(go(c, next))),
                Expr::Binary(op, l, r) => {
                    let left = go(l, next);
                    Expr::Binary(*op, Box::new(left), Box::new(go(r, next)))
                }
            }
        }
        let mut next = 0;
        go(self, &mut next)
    }
}

/// The operator vocabulary a search is allowed to draw from.
#[derive(Debug, Clone, PartialEq)]
pub struct GrammarSet {
    pub unary: Vec<UnaryOp>,
    pub binary: Vec<BinaryOp>,
    pub max_constants: usize,
    pub max_nodes: usize,
}

impl GrammarSet {
    /// Every operator, including the dimensionless-only exp and log.
    pub fn full() -> GrammarSet {
        GrammarSet {
            unary: UnaryOp::ALL.to_vec(),
            binary: BinaryOp::ALL.to_vec(),
            max_constants: 3,
            max_nodes: 12,
        }
    }

    /// Physical-quantity grammar: exp and log removed, everything else kept.
    pub fn restricted() -> GrammarSet {
        GrammarSet {
            unary: UnaryOp::ALL
                .iter()
                .copied()
                .filter(|op| !matches!(op, UnaryOp::Exp | UnaryOp::Log))
                .collect(),
            binary: BinaryOp::ALL.to_vec(),
            max_constants: 3,
            max_nodes: 12,
        }
    }

    /// Distinct symbols available to trees of the given feature arity:
    /// operators, each feature, and the constant leaf.
    pub fn symbol_count(&self, arity: usize) -> usize {
        self.unary.len() + self.binary.len() + arity + 1
    }
}

/// Cost per free constant in the description-length complexity, in bits.
pub const CONSTANT_COST_BITS: f64 = 30.0;

/// Cost of a constant that snapped to a small rational p/q.
pub const SNAPPED_CONSTANT_COST_BITS: f64 = 8.0;

/// Description-length complexity in bits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Complexity {
    pub bits: f64,
}

/// bits = n_nodes * log2(symbol count) + 30 * n_free_constants.
pub fn complexity(expr: &Expr, grammar: &GrammarSet, arity: usize) -> Complexity {
    let symbols = grammar.symbol_count(arity) as f64;
    Complexity {
        bits: expr.node_count() as f64 * symbols.log2()
            + CONSTANT_COST_BITS * expr.slot_count() as f64,
    }
}

/// Complexity with per-slot snap information: slots holding a snapped
/// rational cost 8 bits instead of 30.
pub fn complexity_with_snaps(
    expr: &Expr,
    grammar: &GrammarSet,
    arity: usize,
    snapped: &[bool],
) -> Complexity {
    let symbols = grammar.symbol_count(arity) as f64;
    let const_bits: f64 = (0..expr.slot_count())
        .map(|i| {
            if snapped.get(i).copied().unwrap_or(false) {
                SNAPPED_CONSTANT_COST_BITS
            } else {
                CONSTANT_COST_BITS
            }
        })
        .sum();
    Complexity {
        bits: expr.node_count() as f64 * symbols.log2() + const_bits,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("expression uses {needed} constant slots but {given} values were supplied")]
    ConstantArity { needed: usize, given: usize },
    #[error("expression reads feature x{index} but only {columns} feature columns were supplied")]
    FeatureArity { index: usize, columns: usize },
    #[error("feature columns have unequal lengths")]
    RaggedColumns,
}

/// Elementwise evaluation over column-major features. Out-of-domain points
/// (log of nonpositive, arccos outside [-1,1], division by zero, square
/// root of a negative, fractional power of a negative) come back as NaN,
/// and NaN from a subtree always survives to the root.
pub fn evaluate(
    expr: &Expr,
    constants: &[f64],
    columns: &[Vec<f64>],
) -> Result<Vec<f64>, EvalError> {
    let needed = expr.slot_count();
    if constants.len() != needed {
        return Err(EvalError::ConstantArity {
            needed,
            given: constants.len(),
        });
    }
    if let Some(max) = expr.max_feature_index() {
        if max >= columns.len() {
            return Err(EvalError::FeatureArity {
                index: max,
                columns: columns.len(),
            });
        }
    }
    let n = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != n) {
        return Err(EvalError::RaggedColumns);
    }
    let mut out = vec![0.0; n];
    eval_into(expr, constants, columns, &mut out);
    Ok(out)
}

/// Evaluation into a caller-owned buffer, for fitting loops. `out` must
/// already have the row count as its length; arity checks are the caller's
/// responsibility here.
pub fn eval_into(expr: &Expr, constants: &[f64], columns: &[Vec<f64>], out: &mut [f64]) {
    match expr {
        Expr::Constant(i) => out.fill(constants[*i]),
        Expr::Feature(i) => out.copy_from_slice(&columns[*i]),
        Expr::Unary(op, c) => {
            eval_into(c, constants, columns, out);
            for v in out.iter_mut() {
                *v = apply_unary(*op, *v);
            }
        }
        Expr::Binary(op, l, r) => {
            eval_into(l, constants, columns, out);
            let mut rhs = vec![0.0; out.len()];
            eval_into(r, constants, columns, &mut rhs);
            for (v, b) in out.iter_mut().zip(rhs.iter()) {
                *v = apply_binary(*op, *v, *b);
            }
        }
    }
}

fn guard(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        f64::NAN
    }
}

pub fn apply_unary(op: UnaryOp, x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = match op {
        UnaryOp::Sin => x.sin(),
        UnaryOp::Cos => x.cos(),
        UnaryOp::ArcSin => x.asin(),
        UnaryOp::ArcCos => x.acos(),
        UnaryOp::Tan => x.tan(),
        UnaryOp::ArcTan => x.atan(),
        UnaryOp::Sqrt => x.sqrt(),
        // powf rather than x*x keeps square/cube bitwise identical to the
        // x^2 / x^3 the printer emits for them
        UnaryOp::Square => x.powf(2.0),
        UnaryOp::Cube => x.powf(3.0),
        UnaryOp::Inverse => {
            if x == 0.0 {
                f64::NAN
            } else {
                1.0 / x
            }
        }
        UnaryOp::Negate => -x,
        UnaryOp::Exp => x.exp(),
        UnaryOp::Log => x.ln(),
    };
    guard(y)
}

pub fn apply_binary(op: BinaryOp, a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        return f64::NAN;
    }
    let y = match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                f64::NAN
            } else {
                a / b
            }
        }
        BinaryOp::Pow => a.powf(b),
    };
    guard(y)
}
