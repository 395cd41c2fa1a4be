//! Tiny expression language for user-supplied profiles such as `P(Z)`.
//!
//! Grammar (one free variable, name chosen by the caller):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?        exponent must be constant
//! atom   := number | ident | '(' expr ')'
//! ```
//!
//! Expressions are differentiated symbolically, so `P'` never needs a
//! finite-difference step.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Base raised to a constant exponent.
    Pow(Box<Expr>, f64),
}

impl Expr {
    pub fn parse(src: &str, var: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            var,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!(
                "unexpected trailing input in `{src}` at token {}",
                p.pos
            )));
        }
        Ok(e.simplify())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var => x,
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, c) => pow(a.eval(x), *c),
        }
    }

    pub fn derivative(&self) -> Expr {
        use Expr::*;
        let d = match self {
            Const(_) => Const(0.0),
            Var => Const(1.0),
            Neg(a) => Neg(Box::new(a.derivative())),
            Add(a, b) => Add(Box::new(a.derivative()), Box::new(b.derivative())),
            Sub(a, b) => Sub(Box::new(a.derivative()), Box::new(b.derivative())),
            Mul(a, b) => Add(
                Box::new(Mul(Box::new(a.derivative()), b.clone())),
                Box::new(Mul(a.clone(), Box::new(b.derivative()))),
            ),
            Div(a, b) => Div(
                Box::new(Sub(
                    Box::new(Mul(Box::new(a.derivative()), b.clone())),
                    Box::new(Mul(a.clone(), Box::new(b.derivative()))),
                )),
                Box::new(Pow(b.clone(), 2.0)),
            ),
            Pow(a, c) => Mul(
                Box::new(Mul(Box::new(Const(*c)), Box::new(Pow(a.clone(), c - 1.0)))),
                Box::new(a.derivative()),
            ),
        };
        d.simplify()
    }

    fn is_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Constant folding plus the usual 0/1 identities.
    pub fn simplify(self) -> Expr {
        use Expr::*;
        match self {
            Neg(a) => {
                let a = a.simplify();
                match a {
                    Const(c) => Const(-c),
                    Neg(inner) => *inner,
                    other => Neg(Box::new(other)),
                }
            }
            Add(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                match (a.is_const(), b.is_const()) {
                    (Some(x), Some(y)) => Const(x + y),
                    (Some(x), _) if x == 0.0 => b,
                    (_, Some(y)) if y == 0.0 => a,
                    _ => Add(Box::new(a), Box::new(b)),
                }
            }
            Sub(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                match (a.is_const(), b.is_const()) {
                    (Some(x), Some(y)) => Const(x - y),
                    (Some(x), _) if x == 0.0 => Neg(Box::new(b)),
                    (_, Some(y)) if y == 0.0 => a,
                    _ => Sub(Box::new(a), Box::new(b)),
                }
            }
            Mul(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                match (a.is_const(), b.is_const()) {
                    (Some(x), Some(y)) => Const(x * y),
                    (Some(x), _) | (_, Some(x)) if x == 0.0 => Const(0.0),
                    (Some(x), _) if x == 1.0 => b,
                    (_, Some(y)) if y == 1.0 => a,
                    _ => Mul(Box::new(a), Box::new(b)),
                }
            }
            Div(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                match (a.is_const(), b.is_const()) {
                    (Some(x), Some(y)) => Const(x / y),
                    (Some(x), _) if x == 0.0 => Const(0.0),
                    (_, Some(y)) if y == 1.0 => a,
                    _ => Div(Box::new(a), Box::new(b)),
                }
            }
            Pow(a, c) => {
                let a = a.simplify();
                if c == 0.0 {
                    Const(1.0)
                } else if c == 1.0 {
                    a
                } else if let Some(x) = a.is_const() {
                    Const(pow(x, c))
                } else {
                    Pow(Box::new(a), c)
                }
            }
            other => other,
        }
    }
}

fn pow(x: f64, c: f64) -> f64 {
    if c.fract() == 0.0 && c.abs() <= 64.0 {
        x.powi(c as i32)
    } else {
        x.powf(c)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var => write!(f, "x"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, c) => write!(f, "({a} ^ {c})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-3
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    var: &'a str,
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Tok::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?.simplify();
            let c = exponent.is_const().ok_or_else(|| {
                Error::Parse("exponents must be constant expressions".to_string())
            })?;
            return Ok(Expr::Pow(Box::new(base), c));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Parse("unexpected end of expression".to_string()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Ident(name) if name == self.var => Ok(Expr::Var),
            Tok::Ident(name) => Err(Error::Parse(format!(
                "unknown identifier `{name}` (expected `{}`)",
                self.var
            ))),
            Tok::Op('(') => {
                let e = self.expr()?;
                if self.peek_op() != Some(')') {
                    return Err(Error::Parse("missing `)`".to_string()));
                }
                self.pos += 1;
                Ok(e)
            }
            Tok::Op(c) => Err(Error::Parse(format!("unexpected `{c}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rational_pressure_law() {
        let e = Expr::parse("Z + Z^2/(1+Z)", "Z").unwrap();
        assert!((e.eval(2.0) - (2.0 + 4.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("-Z^2 + 5/3*Z", "Z").unwrap();
        assert!((e.eval(3.0) - (-9.0 + 5.0)).abs() < 1e-14);
        let e = Expr::parse("2^3^2", "Z").unwrap();
        assert_eq!(e.eval(0.0), 512.0);
    }

    #[test]
    fn derivative_matches_hand_computation() {
        let e = Expr::parse("Z + Z^2/(1+Z)", "Z").unwrap();
        let d = e.derivative();
        // d/dZ [Z^2/(1+Z)] = (2Z(1+Z) - Z^2)/(1+Z)^2
        for z in [0.0f64, 0.3, 1.0, 7.5] {
            let expected = 1.0 + (2.0 * z * (1.0 + z) - z * z) / (1.0 + z).powi(2);
            assert!((d.eval(z) - expected).abs() < 1e-14, "z = {z}");
        }
    }

    #[test]
    fn fractional_powers() {
        let e = Expr::parse("Z^(5/3)", "Z").unwrap();
        let d = e.derivative();
        assert!((e.eval(8.0) - 32.0).abs() < 1e-12);
        assert!((d.eval(8.0) - 5.0 / 3.0 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_identifiers_and_variable_exponents() {
        assert!(Expr::parse("Z + q", "Z").is_err());
        assert!(Expr::parse("Z^Z", "Z").is_err());
        assert!(Expr::parse("(Z + 1", "Z").is_err());
        assert!(Expr::parse("Z $ 2", "Z").is_err());
    }

    #[test]
    fn scientific_literals() {
        let e = Expr::parse("1e-3*Z + 2.5E2", "Z").unwrap();
        assert!((e.eval(1000.0) - 251.0).abs() < 1e-12);
    }
}
