//! Infix rendering of expressions for reports and logs. The inverse of
//! [`super::parse::parse`] up to evaluation equality: sugar forms like
//! `inv` and `square` print as `1/(..)` and `(..)^2`, which parse back to
//! trees that evaluate bit-identically.

use super::{BinaryOp, Expr, UnaryOp};

fn prec(op: BinaryOp) -> u8 {
    match op {
        BinaryOp::Add | BinaryOp::Sub => 1,
        BinaryOp::Mul | BinaryOp::Div => 2,
        BinaryOp::Pow => 3,
    }
}

fn node_prec(e: &Expr) -> u8 {
    match e {
        Expr::Constant(_) | Expr::Feature(_) => 10,
        Expr::Unary(op, _) => match op {
            UnaryOp::Inverse => 2,
            UnaryOp::Square | UnaryOp::Cube => 3,
            UnaryOp::Negate => 1,
            _ => 10,
        },
        Expr::Binary(op, _, _) => prec(*op),
    }
}

/// Renders with the slot values substituted in. Slots holding NaN (template
/// wildcards) render symbolically as `c0`, `c1`, ...
pub fn to_text(expr: &Expr, constants: &[f64]) -> String {
    let mut out = String::new();
    write_node(expr, constants, &mut out);
    out
}

fn write_wrapped(e: &Expr, constants: &[f64], min_prec: u8, out: &mut String) {
    if node_prec(e) < min_prec {
        out.push('(');
        write_node(e, constants, out);
        out.push(')');
    } else {
        write_node(e, constants, out);
    }
}

fn write_node(e: &Expr, constants: &[f64], out: &mut String) {
    match e {
        Expr::Feature(i) => {
            out.push('x');
            out.push_str(&i.to_string());
        }
        Expr::Constant(slot) => {
            let v = constants.get(*slot).copied().unwrap_or(f64::NAN);
            if v.is_nan() {
                out.push('c');
                out.push_str(&slot.to_string());
            } else {
                out.push_str(&format_value(v));
            }
        }
        Expr::Unary(op, c) => match op {
            UnaryOp::Inverse => {
                out.push_str("1/");
                write_wrapped(c, constants, 10, out);
            }
            UnaryOp::Square => {
                write_wrapped(c, constants, 10, out);
                out.push_str("^2");
            }
            UnaryOp::Cube => {
                write_wrapped(c, constants, 10, out);
                out.push_str("^3");
            }
            UnaryOp::Negate => {
                out.push('-');
                write_wrapped(c, constants, 10, out);
            }
            _ => {
                out.push_str(op.name());
                out.push('(');
                write_node(c, constants, out);
                out.push(')');
            }
        },
        Expr::Binary(op, l, r) => {
            let p = prec(*op);
            // The operand on the non-associating side keeps its parentheses
            // at equal precedence so the reparse rebuilds the same
            // association (`^` is right-associative, the rest are left, and
            // float arithmetic is not associative).
            let (left_min, right_min) = if matches!(op, BinaryOp::Pow) {
                (p + 1, p)
            } else {
                (p, p + 1)
            };
            write_wrapped(l, constants, left_min, out);
            out.push_str(match op {
                BinaryOp::Add => " + ",
                BinaryOp::Sub => " - ",
                BinaryOp::Mul => "*",
                BinaryOp::Div => "/",
                BinaryOp::Pow => "^",
            });
            write_wrapped(r, constants, right_min, out);
        }
    }
}

fn format_value(v: f64) -> String {
    if v < 0.0 {
        format!("({v})")
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse;
    use super::*;

    #[test]
    fn inverse_form_matches_report_format() {
        let e = Expr::unary(
            UnaryOp::Inverse,
            Expr::binary(
                BinaryOp::Sub,
                Expr::Constant(0),
                Expr::binary(
                    BinaryOp::Mul,
                    Expr::Constant(1),
                    Expr::unary(UnaryOp::Cos, Expr::Feature(0)),
                ),
            ),
        );
        assert_eq!(
            to_text(&e, &[0.662428, 0.061291]),
            "1/(0.662428 - 0.061291*cos(x0))"
        );
    }

    #[test]
    fn template_slots_render_symbolically() {
        let e = Expr::binary(
            BinaryOp::Add,
            Expr::Constant(0),
            Expr::binary(BinaryOp::Mul, Expr::Constant(1), Expr::Feature(0)),
        );
        assert_eq!(to_text(&e, &[f64::NAN, f64::NAN]), "c0 + c1*x0");
    }

    #[test]
    fn negative_constants_stay_parseable() {
        let e = Expr::binary(
            BinaryOp::Div,
            Expr::Constant(0),
            Expr::binary(BinaryOp::Add, Expr::Constant(1), Expr::Feature(0)),
        );
        let text = to_text(&e, &[-16.450619, -10.798107]);
        assert_eq!(text, "(-16.450619)/((-10.798107) + x0)");
        let (back, consts) = parse(&text).unwrap();
        let a = super::super::evaluate(&e, &[-16.450619, -10.798107], &[vec![0.4]]).unwrap();
        let b = super::super::evaluate(&back, &consts, &[vec![0.4]]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn association_is_preserved_through_round_trip() {
        // a - (b - c) must not reparse as (a - b) - c
        let e = Expr::binary(
            BinaryOp::Sub,
            Expr::Constant(0),
            Expr::binary(BinaryOp::Sub, Expr::Constant(1), Expr::Feature(0)),
        );
        let text = to_text(&e, &[1.0, 2.0]);
        assert_eq!(text, "1 - (2 - x0)");
        let (back, consts) = parse(&text).unwrap();
        let a = super::super::evaluate(&e, &[1.0, 2.0], &[vec![0.25]]).unwrap();
        let b = super::super::evaluate(&back, &consts, &[vec![0.25]]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nested_pow_keeps_association() {
        // (y^3)^2 and y^(3^2) are different trees; both must survive a
        // round trip, and their printed forms must be distinct.
        let left = Expr::binary(
            BinaryOp::Pow,
            Expr::binary(BinaryOp::Pow, Expr::Feature(0), Expr::Constant(0)),
            Expr::Constant(1),
        );
        let right = Expr::binary(
            BinaryOp::Pow,
            Expr::Feature(0),
            Expr::binary(BinaryOp::Pow, Expr::Constant(0), Expr::Constant(1)),
        );
        let consts = [3.0, 2.0];
        assert_eq!(to_text(&left, &consts), "(x0^3)^2");
        assert_eq!(to_text(&right, &consts), "x0^3^2");
        for e in [left, right] {
            let text = to_text(&e, &consts);
            let (back, back_consts) = parse(&text).unwrap();
            assert_eq!(text, to_text(&back, &back_consts));
            let a = super::super::evaluate(&e, &consts, &[vec![1.37]]).unwrap();
            let b = super::super::evaluate(&back, &back_consts, &[vec![1.37]]).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sugar_forms_round_trip_by_evaluation() {
        let grid: Vec<f64> = (1..40).map(|i| i as f64 * 0.17 - 2.0).collect();
        let cases = vec![
            Expr::unary(UnaryOp::Square, Expr::Feature(0)),
            Expr::unary(UnaryOp::Cube, Expr::Feature(0)),
            Expr::unary(
                UnaryOp::Inverse,
                Expr::binary(BinaryOp::Add, Expr::Constant(0), Expr::Feature(0)),
            ),
            Expr::unary(UnaryOp::Negate, Expr::binary(BinaryOp::Mul, Expr::Constant(0), Expr::Feature(0))),
            Expr::unary(UnaryOp::Negate, Expr::Feature(0)),
        ];
        for e in cases {
            let consts: Vec<f64> = (0..e.slot_count()).map(|i| 0.7 + i as f64).collect();
            let text = to_text(&e, &consts);
            let (back, back_consts) = parse(&text).unwrap();
            let a = super::super::evaluate(&e, &consts, &[grid.clone()]).unwrap();
            let b = super::super::evaluate(&back, &back_consts, &[grid.clone()]).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                assert!(
                    (x.is_nan() && y.is_nan()) || x == y,
                    "{text}: {x} vs {y}"
                );
            }
        }
    }
}
