//! Recursive-descent parser and generic evaluator for Hamiltonian expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' base)?
//! base   := number | 't' | 'T' | 'pi' | 'r2' | 'x' INT | 'theta_halfsine'
//!         | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | ln | exp | sqrt
//! ```
//!
//! `r2` is `|x|²`, `x1..x2N` are state components and `theta_halfsine` is the
//! profile `sin(2πt/T)` on `[0, T/2]`, `0` on `[T/2, T]`.

use std::f64::consts::PI;
use std::fmt;

use crate::dual::Scalar;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Ln,
    Exp,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Period,
    Pi,
    Time,
    Theta,
    R2,
    /// Zero-based state component.
    State(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn depends_on_state(&self) -> bool {
        match self {
            Expr::R2 | Expr::State(_) => true,
            Expr::Unary(_, a) => a.depends_on_state(),
            Expr::Binary(_, a, b) => a.depends_on_state() || b.depends_on_state(),
            _ => false,
        }
    }

    pub fn depends_on_time(&self) -> bool {
        match self {
            Expr::Time | Expr::Theta => true,
            Expr::Unary(_, a) => a.depends_on_time(),
            Expr::Binary(_, a, b) => a.depends_on_time() || b.depends_on_time(),
            _ => false,
        }
    }

    /// Highest one-based state index referenced, if any.
    pub fn max_state_index(&self) -> Option<usize> {
        match self {
            Expr::State(i) => Some(i + 1),
            Expr::Unary(_, a) => a.max_state_index(),
            Expr::Binary(_, a, b) => match (a.max_state_index(), b.max_state_index()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
            _ => None,
        }
    }

    /// Only `r2` carries the state (so the expression is even in `x`).
    pub fn is_radial(&self) -> bool {
        match self {
            Expr::State(_) => false,
            Expr::Unary(_, a) => a.is_radial(),
            Expr::Binary(_, a, b) => a.is_radial() && b.is_radial(),
            _ => true,
        }
    }

    /// A `sqrt` whose argument depends on the state; such expressions may
    /// lose differentiability at the origin.
    pub fn nonsmooth_at_origin(&self) -> bool {
        match self {
            Expr::Unary(UnaryOp::Sqrt, a) => a.depends_on_state() || a.nonsmooth_at_origin(),
            Expr::Unary(_, a) => a.nonsmooth_at_origin(),
            Expr::Binary(_, a, b) => a.nonsmooth_at_origin() || b.nonsmooth_at_origin(),
            _ => false,
        }
    }

    /// Evaluates at time `t` (already reduced to `[0, period)`) and state `x`.
    pub fn eval<S: Scalar>(&self, t: f64, period: f64, x: &[S]) -> std::result::Result<S, String> {
        let out = match self {
            Expr::Const(c) => S::from_f64(*c),
            Expr::Period => S::from_f64(period),
            Expr::Pi => S::from_f64(PI),
            Expr::Time => S::from_f64(t),
            Expr::Theta => S::from_f64(theta_halfsine(t, period)),
            Expr::R2 => x.iter().fold(S::from_f64(0.0), |acc, &v| acc + v * v),
            Expr::State(i) => *x
                .get(*i)
                .ok_or_else(|| format!("state index x{} out of range", i + 1))?,
            Expr::Unary(op, a) => {
                let v = a.eval(t, period, x)?;
                match op {
                    UnaryOp::Neg => -v,
                    UnaryOp::Sin => v.sin(),
                    UnaryOp::Cos => v.cos(),
                    UnaryOp::Exp => v.exp(),
                    UnaryOp::Ln => {
                        if v.value() <= 0.0 {
                            return Err(format!("ln of nonpositive value {}", v.value()));
                        }
                        v.ln()
                    }
                    UnaryOp::Sqrt => {
                        if v.value() < 0.0 {
                            return Err(format!("sqrt of negative value {}", v.value()));
                        }
                        v.sqrt()
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                if *op == BinaryOp::Pow && !b.depends_on_state() {
                    let base = a.eval(t, period, x)?;
                    let n = b.eval::<f64>(t, period, &[])?;
                    return checked(pow_const(base, n)?);
                }
                let l = a.eval(t, period, x)?;
                let r = b.eval(t, period, x)?;
                match op {
                    BinaryOp::Add => l + r,
                    BinaryOp::Sub => l - r,
                    BinaryOp::Mul => l * r,
                    BinaryOp::Div => {
                        if r.value() == 0.0 {
                            return Err("division by zero".into());
                        }
                        l / r
                    }
                    BinaryOp::Pow => {
                        if l.value() <= 0.0 {
                            return Err(format!(
                                "state-dependent exponent needs a positive base, got {}",
                                l.value()
                            ));
                        }
                        (r * l.ln()).exp()
                    }
                }
            }
        };
        checked(out)
    }
}

fn checked<S: Scalar>(v: S) -> std::result::Result<S, String> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err("non-finite value or derivative (nondifferentiable point or overflow)".into())
    }
}

fn pow_const<S: Scalar>(base: S, n: f64) -> std::result::Result<S, String> {
    if n.fract() == 0.0 && n.abs() <= 64.0 {
        if n < 0.0 && base.value() == 0.0 {
            return Err("zero raised to a negative power".into());
        }
        return Ok(base.powi(n as i32));
    }
    let b = base.value();
    if b < 0.0 {
        return Err(format!("negative base {b} with non-integer exponent {n}"));
    }
    if b == 0.0 && n < 0.0 {
        return Err("zero raised to a negative power".into());
    }
    Ok(base.powf(n))
}

/// Half-sine profile: `sin(2πt/T)` on `[0, T/2]`, zero on `[T/2, T]`.
pub fn theta_halfsine(t: f64, period: f64) -> f64 {
    let s = t.rem_euclid(period);
    if s < 0.5 * period {
        (2.0 * PI * s / period).sin().max(0.0)
    } else {
        0.0
    }
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedExpr {
    pub text: String,
    pub root: Expr,
}

impl ParsedExpr {
    /// Rejects state indices beyond `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self.root.max_state_index() {
            Some(i) if i > dim => Err(Error::Config(format!(
                "expression references x{i} but the state has dimension {dim}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn nonsmooth_at_origin(&self) -> bool {
        self.root.nonsmooth_at_origin()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Period => write!(f, "T"),
            Expr::Pi => write!(f, "pi"),
            Expr::Time => write!(f, "t"),
            Expr::Theta => write!(f, "theta_halfsine"),
            Expr::R2 => write!(f, "r2"),
            Expr::State(i) => write!(f, "x{}", i + 1),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Expr::Unary(op, a) => {
                let name = match op {
                    UnaryOp::Sin => "sin",
                    UnaryOp::Cos => "cos",
                    UnaryOp::Ln => "ln",
                    UnaryOp::Exp => "exp",
                    UnaryOp::Sqrt => "sqrt",
                    UnaryOp::Neg => unreachable!(),
                };
                write!(f, "{name}({a})")
            }
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinaryOp::Add => "+",
                    BinaryOp::Sub => "-",
                    BinaryOp::Mul => "*",
                    BinaryOp::Div => "/",
                    BinaryOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let s = &text[start..i];
            let v = s.parse::<f64>().map_err(|_| Error::Syntax {
                position: start,
                message: format!("malformed number `{s}`"),
            })?;
            out.push(Token {
                tok: Tok::Num(v),
                pos: start,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                pos: start,
            });
        } else if "+-*/^(),".contains(c) {
            out.push(Token {
                tok: Tok::Op(c),
                pos: i,
            });
            i += 1;
        } else {
            return Err(Error::Syntax {
                position: i,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    out.push(Token {
        tok: Tok::End,
        pos: text.len(),
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn is_op(&self, c: char) -> bool {
        self.peek().tok == Tok::Op(c)
    }

    fn expect_op(&mut self, c: char) -> Result<()> {
        if self.is_op(c) {
            self.bump();
            Ok(())
        } else {
            let t = self.peek();
            Err(Error::Syntax {
                position: t.pos,
                message: match &t.tok {
                    Tok::End => format!("expected `{c}` but reached end of input"),
                    other => format!("expected `{c}`, found {}", describe(other)),
                },
            })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.is_op('+') {
                BinaryOp::Add
            } else if self.is_op('-') {
                BinaryOp::Sub
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = if self.is_op('*') {
                BinaryOp::Mul
            } else if self.is_op('/') {
                BinaryOp::Div
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.is_op('-') {
            self.bump();
            let inner = self.factor()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        let base = self.base()?;
        if self.is_op('^') {
            self.bump();
            let exponent = if self.is_op('-') {
                self.bump();
                Expr::Unary(UnaryOp::Neg, Box::new(self.base()?))
            } else {
                self.base()?
            };
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        let tok = self.bump();
        match tok.tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Op('(') => {
                let inner = self.expr()?;
                self.expect_op(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(name, tok.pos),
            Tok::End => Err(Error::Syntax {
                position: tok.pos,
                message: "unexpected end of input".into(),
            }),
            other => Err(Error::Syntax {
                position: tok.pos,
                message: format!("unexpected {}", describe(&other)),
            }),
        }
    }

    fn identifier(&mut self, name: String, pos: usize) -> Result<Expr> {
        let func = match name.as_str() {
            "t" => return Ok(Expr::Time),
            "T" => return Ok(Expr::Period),
            "pi" => return Ok(Expr::Pi),
            "r2" => return Ok(Expr::R2),
            "theta_halfsine" => return Ok(Expr::Theta),
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "ln" => UnaryOp::Ln,
            "exp" => UnaryOp::Exp,
            "sqrt" => UnaryOp::Sqrt,
            _ => {
                if let Some(idx) = name.strip_prefix('x') {
                    if let Ok(i) = idx.parse::<usize>() {
                        if i >= 1 && !idx.starts_with('0') {
                            return Ok(Expr::State(i - 1));
                        }
                    }
                }
                return Err(Error::UnknownIdentifier {
                    name,
                    position: pos,
                });
            }
        };
        if !self.is_op('(') {
            return Err(Error::Syntax {
                position: self.peek().pos,
                message: format!("expected `(` after function `{name}`"),
            });
        }
        self.bump();
        let mut args = Vec::new();
        if !self.is_op(')') {
            args.push(self.expr()?);
            while self.is_op(',') {
                self.bump();
                args.push(self.expr()?);
            }
        }
        self.expect_op(')')?;
        if args.len() != 1 {
            return Err(Error::Arity {
                name,
                expected: 1,
                found: args.len(),
            });
        }
        Ok(Expr::Unary(func, Box::new(args.pop().unwrap())))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::End => "end of input".into(),
    }
}

/// Parses `text` in the expression grammar.
pub fn parse_expression(text: &str) -> Result<ParsedExpr> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
    };
    let root = p.expr()?;
    let t = p.peek();
    if t.tok != Tok::End {
        return Err(Error::Syntax {
            position: t.pos,
            message: format!("unexpected {} after expression", describe(&t.tok)),
        });
    }
    Ok(ParsedExpr {
        text: text.to_string(),
        root,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(text: &str, t: f64, x: &[f64]) -> f64 {
        parse_expression(text).unwrap().root.eval(t, 2.0, x).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, &[]), 7.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, &[]), 1.0);
        assert_eq!(ev("2 - 3 - 4", 0.0, &[]), -5.0);
        assert_eq!(ev("-2^2", 0.0, &[]), -4.0);
        assert_eq!(ev("2^-1", 0.0, &[]), 0.5);
        assert_eq!(ev("(1 + 2) * 3", 0.0, &[]), 9.0);
        assert_eq!(ev("1.5e1 + .5", 0.0, &[]), 15.5);
    }

    #[test]
    fn identifiers() {
        assert_eq!(ev("T", 0.0, &[]), 2.0);
        assert_eq!(ev("t", 0.25, &[]), 0.25);
        assert_eq!(ev("r2", 0.0, &[3.0, 4.0]), 25.0);
        assert_eq!(ev("x2 - x1", 0.0, &[3.0, 4.0]), 1.0);
        assert!((ev("pi", 0.0, &[]) - PI).abs() == 0.0);
        assert!((ev("theta_halfsine", 0.5, &[]) - 1.0).abs() < 1e-15);
        assert_eq!(ev("theta_halfsine", 1.5, &[]), 0.0);
    }

    #[test]
    fn zero_expression() {
        let e = parse_expression("0").unwrap();
        assert_eq!(e.root, Expr::Const(0.0));
    }

    #[test]
    fn unbalanced_parenthesis_reports_end_position() {
        let err = parse_expression("ln(1+r2").unwrap_err();
        match err {
            Error::Syntax { position, .. } => assert_eq!(position, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert!(matches!(
            parse_expression("1 + y"),
            Err(Error::UnknownIdentifier { position: 4, .. })
        ));
        assert!(matches!(
            parse_expression("x0"),
            Err(Error::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_expression("sin(1, 2)"),
            Err(Error::Arity { found: 2, .. })
        ));
        assert!(matches!(parse_expression("sin 1"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("1 2"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("1 $ 2"), Err(Error::Syntax { position: 2, .. })));
    }

    #[test]
    fn domain_errors() {
        let e = parse_expression("ln(x1)").unwrap();
        assert!(e.root.eval(0.0, 1.0, &[-1.0, 0.0]).is_err());
        let e = parse_expression("x1^0.5").unwrap();
        assert!(e.root.eval(0.0, 1.0, &[-1.0, 0.0]).is_err());
        let e = parse_expression("1/(x1 - x1)").unwrap();
        assert!(e.root.eval(0.0, 1.0, &[1.0, 0.0]).is_err());
        let e = parse_expression("x1^3").unwrap();
        assert_eq!(e.root.eval(0.0, 1.0, &[-2.0, 0.0]).unwrap(), -8.0);
    }

    #[test]
    fn structure_queries() {
        let e = parse_expression("sqrt(r2) + sin(2*pi*t/T)").unwrap();
        assert!(e.nonsmooth_at_origin());
        assert!(e.root.is_radial());
        assert!(e.root.depends_on_time());
        let e = parse_expression("x3 * ln(1 + r2)").unwrap();
        assert_eq!(e.root.max_state_index(), Some(3));
        assert!(e.validate(2).is_err());
        assert!(e.validate(4).is_ok());
        assert!(!e.root.is_radial());
    }

    #[test]
    fn display_reparses_to_same_tree() {
        let e = parse_expression("(3/2 + sin(2*pi*t/T)) * ln(1+r2)^(5/2) - -x1").unwrap();
        let again = parse_expression(&e.root.to_string()).unwrap();
        assert_eq!(e.root, again.root);
    }
}
