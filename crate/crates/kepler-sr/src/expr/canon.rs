//! Canonical forms and shape matching: commutative-operand ordering for
//! search dedup, wildcard matching against templates, and the algebraic
//! recognizer for the orbit family 1/(c0 + c1*cos(theta)).

use super::{BinaryOp, Expr, UnaryOp};

/// Canonical form: commutative operands sorted by the total order on
/// subtrees, constant slots renumbered in reading order. Two expressions
/// with the same shape-up-to-commutativity compare equal after this.
pub fn canonicalize(expr: &Expr) -> Expr {
    canonicalize_with_map(expr).0
}

/// Canonical form plus the slot permutation: `map[new_slot] = old_slot`.
/// Evaluating the canonical tree with constants permuted through the map
/// reproduces the original evaluation exactly.
pub fn canonicalize_with_map(expr: &Expr) -> (Expr, Vec<usize>) {
    let sorted = sort_commutative(expr);
    let mut map = Vec::new();
    let renumbered = renumber_collect(&sorted, &mut map);
    (renumbered, map)
}

fn sort_commutative(e: &Expr) -> Expr {
    match e {
        Expr::Constant(i) => Expr::Constant(*i),
        Expr::Feature(i) => Expr::Feature(*i),
        Expr::Unary(op, c) => Expr::Unary(*op, Box::new(sort_commutative(c))),
        Expr::Binary(op, l, r) => {
            let mut left = sort_commutative(l);
            let mut right = sort_commutative(r);
            if op.is_commutative() && shape_key(&right) < shape_key(&left) {
                std::mem::swap(&mut left, &mut right);
            }
            Expr::Binary(*op, Box::new(left), Box::new(right))
        }
    }
}

/// Ordering key that ignores slot indices, so `c1*x0` and `c0*x0` sort the
/// same way regardless of where their slots sit in the reading order.
fn shape_key(e: &Expr) -> Expr {
    match e {
        Expr::Constant(_) => Expr::Constant(0),
        Expr::Feature(i) => Expr::Feature(*i),
        Expr::Unary(op, c) => Expr::Unary(*op, Box::new(shape_key(c))),
        Expr::Binary(op, l, r) => {
            Expr::Binary(*op, Box::new(shape_key(l)), Box::new(shape_key(r)))
        }
    }
}

fn renumber_collect(e: &Expr, map: &mut Vec<usize>) -> Expr {
    match e {
        Expr::Constant(old) => {
            map.push(*old);
            Expr::Constant(map.len() - 1)
        }
        Expr::Feature(i) => Expr::Feature(*i),
        Expr::Unary(op, c) => Expr::Unary(*op, Box::new(renumber_collect(c, map))),
        Expr::Binary(op, l, r) => {
            let left = renumber_collect(l, map);
            Expr::Binary(*op, Box::new(left), Box::new(renumber_collect(r, map)))
        }
    }
}

/// Shape-wise template match. Template constant slots are wildcards for any
/// literal; a candidate's feature-free subtrees collapse into a wildcard;
/// `1/x`, `a - b`, and negations normalize so that sign differences on
/// constants are absorbed. True iff the normalized shapes coincide.
pub fn structural_match(expr: &Expr, template: &Expr) -> bool {
    wildcard_shape(expr) == wildcard_shape(template)
}

const WILD: Expr = Expr::Constant(0);

fn wildcard_shape(e: &Expr) -> Expr {
    if !e.contains_feature() {
        return WILD;
    }
    match e {
        Expr::Constant(_) => WILD,
        Expr::Feature(i) => Expr::Feature(*i),
        Expr::Unary(UnaryOp::Inverse, c) => sorted_binary(BinaryOp::Div, WILD, wildcard_shape(c)),
        Expr::Unary(UnaryOp::Negate, c) => absorb_negation(wildcard_shape(c)),
        Expr::Unary(op, c) => Expr::Unary(*op, Box::new(wildcard_shape(c))),
        Expr::Binary(BinaryOp::Sub, l, r) => {
            let left = wildcard_shape(l);
            let right = absorb_negation(wildcard_shape(r));
            sorted_binary(BinaryOp::Add, left, right)
        }
        Expr::Binary(op, l, r) => sorted_binary(*op, wildcard_shape(l), wildcard_shape(r)),
    }
}

/// Negation of an already-normalized shape. A wildcard soaks up the sign,
/// as does any product carrying a wildcard factor; double negation cancels.
fn absorb_negation(shape: Expr) -> Expr {
    match &shape {
        Expr::Constant(_) => shape,
        Expr::Binary(BinaryOp::Mul, l, r)
            if matches!(**l, Expr::Constant(_)) || matches!(**r, Expr::Constant(_)) =>
        {
            shape
        }
        Expr::Unary(UnaryOp::Negate, inner) => (**inner).clone(),
        _ => Expr::unary(UnaryOp::Negate, shape),
    }
}

fn sorted_binary(op: BinaryOp, l: Expr, r: Expr) -> Expr {
    if op.is_commutative() && r < l {
        Expr::binary(op, r, l)
    } else {
        Expr::binary(op, l, r)
    }
}

/// Parameters of a recognized orbit-family member, normalized so the
/// expression equals `1/(c0 + c1*cos(theta))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitFamilyParams {
    pub c0: f64,
    pub c1: f64,
}

impl OrbitFamilyParams {
    /// Semi-major-axis analogue: a = 1/|c0|.
    pub fn semi_major(&self) -> f64 {
        1.0 / self.c0.abs()
    }

    /// Eccentricity analogue: |c1/c0|.
    pub fn eccentricity(&self) -> f64 {
        (self.c1 / self.c0).abs()
    }
}

/// Recognizes any enumerable parameterization of the orbit family
/// N/(p + q*cos(theta)) and returns it normalized to 1/(c0 + c1*cos(theta)).
///
/// `observational` says whether feature x0 already is cos(theta) (true) or
/// the raw angle (false, so a Cos node is required). Membership needs two
/// degrees of freedom: at least two of the numerator, the constant term,
/// and the cosine coefficient must be backed by fitted constant slots.
/// One-parameter shapes like 1/(c + cos(theta)) cannot represent the orbit
/// equation and are rejected.
pub fn recognize_orbit_family(
    expr: &Expr,
    constants: &[f64],
    observational: bool,
) -> Option<OrbitFamilyParams> {
    let (num, den) = match expr {
        Expr::Unary(UnaryOp::Inverse, den) => (None, den.as_ref()),
        Expr::Binary(BinaryOp::Div, num, den) => (Some(num.as_ref()), den.as_ref()),
        Expr::Binary(BinaryOp::Mul, l, r) => match (l.as_ref(), r.as_ref()) {
            (alpha, Expr::Unary(UnaryOp::Inverse, den)) if !alpha.contains_feature() => {
                (Some(alpha), den.as_ref())
            }
            (Expr::Unary(UnaryOp::Inverse, den), alpha) if !alpha.contains_feature() => {
                (Some(alpha), den.as_ref())
            }
            _ => return None,
        },
        _ => return None,
    };

    let (alpha, alpha_free) = match num {
        None => (1.0, false),
        Some(n) => {
            if n.contains_feature() {
                return None;
            }
            (const_value(n, constants)?, n.slot_count() > 0)
        }
    };

    let mut terms = Vec::new();
    flatten_affine(den, false, &mut terms);
    let mut p = 0.0;
    let mut p_free = false;
    let mut q: Option<(f64, bool)> = None;
    for (term, negated) in terms {
        let sign = if negated { -1.0 } else { 1.0 };
        if !term.contains_feature() {
            p += sign * const_value(term, constants)?;
            p_free |= term.slot_count() > 0;
        } else if is_cos_theta(term, observational) {
            if q.is_some() {
                return None;
            }
            q = Some((sign, false));
        } else if let Expr::Binary(BinaryOp::Mul, l, r) = term {
            let coeff = if is_cos_theta(r, observational) {
                l.as_ref()
            } else if is_cos_theta(l, observational) {
                r.as_ref()
            } else {
                return None;
            };
            if coeff.contains_feature() || q.is_some() {
                return None;
            }
            q = Some((sign * const_value(coeff, constants)?, coeff.slot_count() > 0));
        } else {
            return None;
        }
    }
    let (q, q_free) = q?;

    let free = [alpha_free, p_free, q_free].iter().filter(|f| **f).count();
    if free < 2 {
        return None;
    }
    if alpha == 0.0 || p == 0.0 || !alpha.is_finite() || !p.is_finite() || !q.is_finite() {
        return None;
    }
    Some(OrbitFamilyParams {
        c0: p / alpha,
        c1: q / alpha,
    })
}

fn flatten_affine<'a>(e: &'a Expr, negated: bool, out: &mut Vec<(&'a Expr, bool)>) {
    match e {
        Expr::Binary(BinaryOp::Add, l, r) => {
            flatten_affine(l, negated, out);
            flatten_affine(r, negated, out);
        }
        Expr::Binary(BinaryOp::Sub, l, r) => {
            flatten_affine(l, negated, out);
            flatten_affine(r, !negated, out);
        }
        Expr::Unary(UnaryOp::Negate, c) => flatten_affine(c, !negated, out),
        other => out.push((other, negated)),
    }
}

fn is_cos_theta(e: &Expr, observational: bool) -> bool {
    if observational {
        matches!(e, Expr::Feature(0))
    } else {
        matches!(e, Expr::Unary(UnaryOp::Cos, c) if matches!(**c, Expr::Feature(0)))
    }
}

fn const_value(e: &Expr, constants: &[f64]) -> Option<f64> {
    match e {
        Expr::Constant(i) => constants.get(*i).copied(),
        Expr::Feature(_) => None,
        Expr::Unary(op, c) => Some(super::apply_unary(*op, const_value(c, constants)?)),
        Expr::Binary(op, l, r) => Some(super::apply_binary(
            *op,
            const_value(l, constants)?,
            const_value(r, constants)?,
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{evaluate, parse::parse};
    use super::*;

    #[test]
    fn commutative_operands_reach_one_form() {
        let (a, _) = parse("x0 + x1").unwrap();
        let (b, _) = parse("x1 + x0").unwrap();
        assert_eq!(canonicalize(&a), canonicalize(&b));
    }

    #[test]
    fn canonicalization_is_idempotent() {
        let (e, _) = parse("(x0*3)*2 + sin(x1 + x0)").unwrap();
        let once = canonicalize(&e);
        assert_eq!(canonicalize(&once), once);
    }

    #[test]
    fn nested_constant_products_agree() {
        let (a, ca) = parse("(x0*0.5)*2.5").unwrap();
        let (b, cb) = parse("2.5*(0.5*x0)").unwrap();
        assert_eq!(canonicalize(&a), canonicalize(&b));

        // exhaustive evaluation agreement through the slot map
        let (canon_a, map_a) = canonicalize_with_map(&a);
        let (canon_b, map_b) = canonicalize_with_map(&b);
        let grid: Vec<f64> = (0..100).map(|i| (i as f64) * 0.07 - 3.5).collect();
        let perm_a: Vec<f64> = map_a.iter().map(|&i| ca[i]).collect();
        let perm_b: Vec<f64> = map_b.iter().map(|&i| cb[i]).collect();
        let ea = evaluate(&a, &ca, &[grid.clone()]).unwrap();
        let eca = evaluate(&canon_a, &perm_a, &[grid.clone()]).unwrap();
        let ecb = evaluate(&canon_b, &perm_b, &[grid.clone()]).unwrap();
        assert_eq!(ea, eca);
        assert_eq!(ea, ecb);
    }

    #[test]
    fn match_accepts_fitted_inverse_affine() {
        let (candidate, _) = parse("1/(0.662428 - 0.061291*cos(x0))").unwrap();
        let (template, _) = parse("c0/(1 + c1*cos(x0))").unwrap();
        assert!(structural_match(&candidate, &template));
    }

    #[test]
    fn match_rejects_exponential_family() {
        let (candidate, _) = parse("1.5*exp(0.1*cos(x0))").unwrap();
        let (template, _) = parse("c0/(1 + c1*cos(x0))").unwrap();
        assert!(!structural_match(&candidate, &template));
    }

    #[test]
    fn match_is_reflexive_on_features() {
        let (a, _) = parse("x0").unwrap();
        assert!(structural_match(&a, &a));
    }

    #[test]
    fn match_ignores_constant_sign_and_subtraction() {
        let (template, _) = parse("c0/(1 + c1*cos(x0))").unwrap();
        let (plus, _) = parse("2/(0.5 + 3*cos(x0))").unwrap();
        let (minus, _) = parse("2/(0.5 - 3*cos(x0))").unwrap();
        assert!(structural_match(&plus, &template));
        assert!(structural_match(&minus, &template));
    }

    #[test]
    fn recognizer_normalizes_the_five_node_parameterization() {
        // c0/(c1 + x0) with x0 = cos(theta): the minimal family member.
        let (e, _) = parse("c0/(c1 + x0)").unwrap();
        let params = recognize_orbit_family(&e, &[-16.450619, -10.798107], true).unwrap();
        assert!((params.c0 - 0.6563955).abs() < 1e-6, "{}", params.c0);
        assert!((params.c1 + 0.0607880).abs() < 1e-6, "{}", params.c1);
        assert!((params.semi_major() - 1.523472).abs() < 1e-5);
        assert!((params.eccentricity() - 0.0926088).abs() < 1e-6);
    }

    #[test]
    fn recognizer_handles_the_textbook_parameterization() {
        let (e, c) = parse("1/(0.656384 - 0.060781*cos(x0))").unwrap();
        let params = recognize_orbit_family(&e, &c, false).unwrap();
        assert!((params.c0 - 0.656384).abs() < 1e-12);
        assert!((params.c1 + 0.060781).abs() < 1e-12);
    }

    #[test]
    fn recognizer_rejects_one_parameter_shapes() {
        // inv(c0 + cos(theta)): a single degree of freedom cannot span the
        // family, whichever feature convention is active.
        let (raw, c) = parse("inv(2 + cos(x0))").unwrap();
        assert!(recognize_orbit_family(&raw, &c, false).is_none());
        let (obs, c) = parse("inv(2 + x0)").unwrap();
        assert!(recognize_orbit_family(&obs, &c, true).is_none());

        // the Div form with a free numerator does span it: alpha and p
        // reparameterize both normalized coefficients
        let (div, c) = parse("1/(2 + x0)").unwrap();
        assert!(recognize_orbit_family(&div, &c, true).is_some());
    }

    #[test]
    fn recognizer_rejects_sine_and_exponential_shapes() {
        let (sine, c) = parse("c0/(c1 + x1)").unwrap();
        assert!(recognize_orbit_family(&sine, &c, true).is_none());
        let (exp, c) = parse("1.5*exp(0.1*x0)").unwrap();
        assert!(recognize_orbit_family(&exp, &c, true).is_none());
        let (lin, c) = parse("c0 + c1*x0").unwrap();
        assert!(recognize_orbit_family(&lin, &c, true).is_none());
    }

    #[test]
    fn recognizer_requires_cos_in_raw_angle_space() {
        let (e, _) = parse("c0/(c1 + x0)").unwrap();
        assert!(recognize_orbit_family(&e, &[2.0, 3.0], false).is_none());
        let (e, _) = parse("c0/(c1 + c2*cos(x0))").unwrap();
        assert!(recognize_orbit_family(&e, &[2.0, 3.0, 0.5], false).is_some());
    }

    #[test]
    fn recognizer_absorbs_negated_products() {
        let (e, c) = parse("1/(0.65 - 0.06*x0)").unwrap();
        let p = recognize_orbit_family(&e, &c, true).unwrap();
        assert!((p.c0 - 0.65).abs() < 1e-15);
        assert!((p.c1 + 0.06).abs() < 1e-15);
    }
}
