//! Infix equation parser. Accepts the report format (`x0`, decimal
//! literals, `+ - * / ^`, functions by name) plus the variants that appear
//! in transcribed tables: unicode `× ÷ −`, `x_0`, `pi`, and symbolic
//! constant slots `c0`, `c1`, ... for templates.

use super::{BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

fn err<T>(position: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        position,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0 }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn next_tok(&mut self) -> Result<(usize, Tok), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(c) = self.src[self.pos..].chars().next() else {
            return Ok((start, Tok::Eof));
        };
        let tok = match c {
            '+' => Tok::Plus,
            '-' | '\u{2212}' => Tok::Minus,
            '*' | '\u{d7}' | '\u{b7}' => Tok::Star,
            '/' | '\u{f7}' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '0'..='9' | '.' => {
                let mut end = self.pos;
                let bytes = self.src.as_bytes();
                while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                    end += 1;
                }
                if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                    let mut exp_end = end + 1;
                    if exp_end < bytes.len() && (bytes[exp_end] == b'+' || bytes[exp_end] == b'-') {
                        exp_end += 1;
                    }
                    if exp_end < bytes.len() && bytes[exp_end].is_ascii_digit() {
                        end = exp_end;
                        while end < bytes.len() && bytes[end].is_ascii_digit() {
                            end += 1;
                        }
                    }
                }
                let text = &self.src[self.pos..end];
                let value: f64 = text
                    .parse()
                    .map_err(|_| ParseError {
                        position: start,
                        message: format!("malformed number `{text}`"),
                    })?;
                self.pos = end;
                return Ok((start, Tok::Num(value)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut end = self.pos;
                let bytes = self.src.as_bytes();
                while end < bytes.len()
                    && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_')
                {
                    end += 1;
                }
                let name = self.src[self.pos..end].to_string();
                self.pos = end;
                return Ok((start, Tok::Ident(name)));
            }
            other => return err(start, format!("unexpected character `{other}`")),
        };
        self.pos += c.len_utf8();
        Ok((start, tok))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<(usize, Tok)>,
    constants: Vec<f64>,
    depth: usize,
}

const MAX_DEPTH: usize = 256;

/// Parses an equation into a tree plus the literal values of its constant
/// slots, numbered in reading order. Symbolic `cN` identifiers become slots
/// holding NaN so templates print back symbolically.
pub fn parse(text: &str) -> Result<(Expr, Vec<f64>), ParseError> {
    let mut p = Parser {
        lexer: Lexer::new(text),
        peeked: None,
        constants: Vec::new(),
        depth: 0,
    };
    let expr = p.expr_bp(0)?;
    let (pos, tok) = p.peek()?.clone();
    if tok != Tok::Eof {
        return err(pos, format!("unexpected trailing input `{tok:?}`"));
    }
    Ok((expr, p.constants))
}

fn unary_by_name(name: &str) -> Option<UnaryOp> {
    Some(match name {
        "sin" => UnaryOp::Sin,
        "cos" => UnaryOp::Cos,
        "asin" | "arcsin" => UnaryOp::ArcSin,
        "acos" | "arccos" => UnaryOp::ArcCos,
        "tan" => UnaryOp::Tan,
        "atan" | "arctan" => UnaryOp::ArcTan,
        "sqrt" => UnaryOp::Sqrt,
        "square" => UnaryOp::Square,
        "cube" => UnaryOp::Cube,
        "inv" | "inverse" => UnaryOp::Inverse,
        "neg" | "negate" => UnaryOp::Negate,
        "exp" => UnaryOp::Exp,
        "log" | "ln" => UnaryOp::Log,
        _ => return None,
    })
}

fn feature_index(name: &str) -> Option<usize> {
    let rest = name.strip_prefix('x')?;
    let digits = rest.strip_prefix('_').unwrap_or(rest);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn slot_marker(name: &str) -> bool {
    name.strip_prefix('c')
        .map(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
        .unwrap_or(false)
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<&(usize, Tok), ParseError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next_tok()?);
        }
        Ok(self.peeked.as_ref().unwrap())
    }

    fn bump(&mut self) -> Result<(usize, Tok), ParseError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next_tok(),
        }
    }

    fn literal(&mut self, value: f64) -> Expr {
        let slot = self.constants.len();
        self.constants.push(value);
        Expr::Constant(slot)
    }

    fn expr_bp(&mut self, min_bp: u8) -> Result<Expr, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return err(self.lexer.pos, "expression nested too deeply");
        }
        let result = self.expr_bp_inner(min_bp);
        self.depth -= 1;
        result
    }

    fn expr_bp_inner(&mut self, min_bp: u8) -> Result<Expr, ParseError> {
        let (pos, tok) = self.bump()?;
        let mut lhs = match tok {
            Tok::Num(v) => self.literal(v),
            Tok::Minus => {
                let rhs = self.expr_bp(5)?;
                match rhs {
                    Expr::Constant(slot) if !self.constants[slot].is_nan() => {
                        self.constants[slot] = -self.constants[slot];
                        Expr::Constant(slot)
                    }
                    other => Expr::unary(UnaryOp::Negate, other),
                }
            }
            Tok::LParen => {
                let inner = self.expr_bp(0)?;
                let (rpos, rtok) = self.bump()?;
                if rtok != Tok::RParen {
                    return err(rpos, "expected `)`");
                }
                inner
            }
            Tok::Ident(name) => {
                if let Some(idx) = feature_index(&name) {
                    Expr::Feature(idx)
                } else if slot_marker(&name) {
                    self.literal(f64::NAN)
                } else if name == "pi" {
                    self.literal(std::f64::consts::PI)
                } else if let Some(op) = unary_by_name(&name) {
                    let (lpos, ltok) = self.bump()?;
                    if ltok != Tok::LParen {
                        return err(lpos, format!("expected `(` after function `{name}`"));
                    }
                    let arg = self.expr_bp(0)?;
                    let (rpos, rtok) = self.bump()?;
                    if rtok != Tok::RParen {
                        return err(rpos, "expected `)`");
                    }
                    Expr::unary(op, arg)
                } else {
                    return err(pos, format!("unknown identifier `{name}`"));
                }
            }
            other => return err(pos, format!("unexpected token `{other:?}`")),
        };

        loop {
            let (_, tok) = self.peek()?.clone();
            let (op, lbp, rbp) = match tok {
                Tok::Plus => (BinaryOp::Add, 1, 2),
                Tok::Minus => (BinaryOp::Sub, 1, 2),
                Tok::Star => (BinaryOp::Mul, 3, 4),
                Tok::Slash => (BinaryOp::Div, 3, 4),
                Tok::Caret => (BinaryOp::Pow, 8, 7),
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            self.bump()?;
            let rhs = self.expr_bp(rbp)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }
}

#[cfg(test)]
mod tests {
    use super::super::evaluate;
    use super::*;

    fn eval1(text: &str, x: f64) -> f64 {
        let (e, c) = parse(text).unwrap();
        evaluate(&e, &c, &[vec![x]]).unwrap()[0]
    }

    #[test]
    fn bare_feature() {
        let (e, c) = parse("x0").unwrap();
        assert_eq!(e, Expr::Feature(0));
        assert!(c.is_empty());
    }

    #[test]
    fn underscore_feature_form() {
        let (e, _) = parse("x_0").unwrap();
        assert_eq!(e, Expr::Feature(0));
        let (e, _) = parse("x_12").unwrap();
        assert_eq!(e, Expr::Feature(12));
    }

    #[test]
    fn inverse_affine_evaluates() {
        let v = eval1("1/(0.662428 - 0.061291*cos(x0))", 0.0);
        assert!((v - 1.0 / (0.662428 - 0.061291)).abs() < 1e-15);
    }

    #[test]
    fn unicode_operators() {
        let v = eval1("1.5\u{d7}x0 \u{2212} 2", 2.0);
        assert!((v - 1.0).abs() < 1e-15);
        let v = eval1("x0 \u{f7} 4", 2.0);
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pi_and_scientific_literals() {
        let v = eval1("cos(pi)", 0.0);
        assert!((v + 1.0).abs() < 1e-15);
        let v = eval1("1e-3 + 2.5E+2", 0.0);
        assert!((v - 250.001).abs() < 1e-12);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval1("2 - 3 - 4", 0.0), -5.0);
        assert_eq!(eval1("2^3^2", 0.0), 512.0);
        assert_eq!(eval1("2*x0^2", 3.0), 18.0);
        assert_eq!(eval1("-x0^2", 3.0), -9.0);
        assert_eq!(eval1("2 + 3*4", 0.0), 14.0);
    }

    #[test]
    fn negative_exponent_pow_form() {
        let v = eval1("(0.662428 - 0.061291*x0)^(-1.001335978508)", 1.0);
        let expected = (0.662428_f64 - 0.061291).powf(-1.001335978508);
        assert!((v - expected).abs() < 1e-15);
    }

    #[test]
    fn template_slots_are_nan() {
        let (e, c) = parse("c0/(1 + c1*cos(x0))").unwrap();
        assert_eq!(e.slot_count(), 3);
        assert!(c[0].is_nan());
        assert!((c[1] - 1.0).abs() < 1e-15);
        assert!(c[2].is_nan());
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("1 +").unwrap_err();
        assert_eq!(e.position, 3);
        let e = parse("(x0").unwrap_err();
        assert_eq!(e.position, 3);
        let e = parse("foo(x0)").unwrap_err();
        assert_eq!(e.position, 0);
        let e = parse("30 15 30").unwrap_err();
        assert_eq!(e.position, 3);
        let e = parse("x0 + $").unwrap_err();
        assert_eq!(e.position, 5);
    }

    #[test]
    fn deep_nesting_does_not_overflow() {
        let mut text = String::new();
        for _ in 0..200 {
            text.push_str("sin(");
        }
        text.push_str("x0");
        for _ in 0..200 {
            text.push(')');
        }
        assert!(parse(&text).is_ok());
    }

    #[test]
    fn absurd_nesting_is_rejected_not_crashed() {
        let mut text = String::new();
        for _ in 0..2000 {
            text.push('(');
        }
        text.push_str("x0");
        for _ in 0..2000 {
            text.push(')');
        }
        assert!(parse(&text).is_err());
    }
}
