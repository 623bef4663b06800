//! Odd potentials from JSON: a list of `(subset, expression)` pairs where the
//! subset names an odd monomial `theta^{i_1} ... theta^{i_k}` (1-based,
//! ascending, `k` odd) and the expression is a coefficient in `u`.
//!
//! Expression grammar, loosest binding first:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*        division only by constants
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' integer)?                non-negative integer exponent
//! atom   := number | 'i' | 'u' index | 'exp' '(' expr ')' | '(' expr ')'
//! ```

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Result};
use frobenius_core::jet::Jet;
use frobenius_core::super_frobenius::{CoefficientFn, SuperPotential};
use frobenius_core::C64;
use serde::Deserialize;

use crate::UsageError;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(C64),
    /// Zero-based even coordinate.
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
    Exp(Box<Expr>),
}

impl Expr {
    /// Numeric value of a variable-free expression.
    fn constant_value(&self) -> Option<C64> {
        Some(match self {
            Expr::Const(c) => *c,
            Expr::Var(_) => return None,
            Expr::Add(a, b) => a.constant_value()? + b.constant_value()?,
            Expr::Sub(a, b) => a.constant_value()? - b.constant_value()?,
            Expr::Mul(a, b) => a.constant_value()? * b.constant_value()?,
            Expr::Neg(a) => -a.constant_value()?,
            Expr::Pow(a, k) => a.constant_value()?.powu(*k),
            Expr::Exp(a) => a.constant_value()?.exp(),
        })
    }

    pub fn max_variable(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(v) => Some(*v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.max_variable().max(b.max_variable())
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) => a.max_variable(),
        }
    }

    /// Evaluates on Taylor jets of the coordinates.
    pub fn eval(&self, u: &[Jet]) -> Jet {
        match self {
            Expr::Const(c) => Jet::constant(u[0].layout(), *c),
            Expr::Var(v) => u[*v].clone(),
            Expr::Add(a, b) => &a.eval(u) + &b.eval(u),
            Expr::Sub(a, b) => &a.eval(u) - &b.eval(u),
            Expr::Mul(a, b) => &a.eval(u) * &b.eval(u),
            Expr::Neg(a) => -a.eval(u),
            Expr::Pow(a, k) => a.eval(u).powu(*k),
            Expr::Exp(a) => a.eval(u).exp(),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: &str) -> UsageError {
        UsageError(format!(
            "expression {:?}, at offset {}: {msg}",
            self.src, self.pos
        ))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, UsageError> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
            } else if self.eat('-') {
                acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, UsageError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = Expr::Mul(Box::new(acc), Box::new(self.unary()?));
            } else if self.eat('/') {
                let start = self.pos;
                let divisor = self.unary()?;
                let value = divisor.constant_value();
                match value {
                    Some(c) if c.norm() > 0.0 => {
                        acc = Expr::Mul(Box::new(acc), Box::new(Expr::Const(c.inv())))
                    }
                    Some(_) => {
                        self.pos = start;
                        return Err(self.error("division by zero"));
                    }
                    None => {
                        self.pos = start;
                        return Err(self.error("only division by constants is allowed"));
                    }
                }
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, UsageError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, UsageError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        self.skip_ws();
        let digits = self.take_while(|c| c.is_ascii_digit());
        if digits.is_empty() {
            return Err(self.error("exponent must be a non-negative integer"));
        }
        let k = digits
            .parse::<u32>()
            .map_err(|_| self.error("exponent too large"))?;
        Ok(Expr::Pow(Box::new(base), k))
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.src[self.pos..].chars().next().filter(|&c| f(c)) {
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    fn number(&mut self) -> Result<f64, UsageError> {
        let start = self.pos;
        self.take_while(|c| c.is_ascii_digit() || c == '.');
        let rest = &self.src[self.pos..];
        if rest.starts_with(['e', 'E']) && !rest.starts_with("exp") {
            let save = self.pos;
            self.pos += 1;
            if self.src[self.pos..].starts_with(['+', '-']) {
                self.pos += 1;
            }
            if self.take_while(|c| c.is_ascii_digit()).is_empty() {
                self.pos = save;
            }
        }
        self.src[start..self.pos].parse::<f64>().map_err(|_| {
            self.pos = start;
            self.error("malformed number")
        })
    }

    fn atom(&mut self) -> Result<Expr, UsageError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                Ok(Expr::Const(C64::new(self.number()?, 0.0)))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let word = self.take_while(|c| c.is_ascii_alphanumeric());
                if word == "i" {
                    return Ok(Expr::Const(C64::new(0.0, 1.0)));
                }
                if word == "exp" {
                    if !self.eat('(') {
                        return Err(self.error("expected '(' after exp"));
                    }
                    let inner = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.error("expected ')'"));
                    }
                    return Ok(Expr::Exp(Box::new(inner)));
                }
                if let Some(index) = word.strip_prefix('u').and_then(|d| d.parse::<usize>().ok()) {
                    if index >= 1 {
                        return Ok(Expr::Var(index - 1));
                    }
                }
                self.pos = start;
                Err(self.error(&format!("unknown name {word:?}")))
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }
}

pub fn parse_expression(src: &str) -> Result<Expr, UsageError> {
    let mut p = Parser { src, pos: 0 };
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TermFile {
    Pair(Vec<usize>, String),
    Object { subset: Vec<usize>, expr: String },
}

/// One odd monomial of the potential.
#[derive(Clone, Debug, PartialEq)]
pub struct PsiTerm {
    /// Bit `k` set for `theta^{k+1}`.
    pub mask: u32,
    pub coefficient: Expr,
}

pub fn parse_terms(n: usize, text: &str) -> Result<Vec<PsiTerm>> {
    if n == 0 || n > 16 {
        bail!(UsageError(format!("n = {n} must be in 1..=16")));
    }
    let raw: Vec<TermFile> =
        serde_json::from_str(text).map_err(|e| UsageError(format!("potential file: {e}")))?;
    let mut terms = Vec::with_capacity(raw.len());
    for (k, term) in raw.into_iter().enumerate() {
        let (subset, expr) = match term {
            TermFile::Pair(s, e) | TermFile::Object { subset: s, expr: e } => (s, e),
        };
        let mut mask = 0u32;
        for &i in &subset {
            if i == 0 || i > n {
                bail!(UsageError(format!(
                    "term {k}: odd index {i} outside 1..={n}"
                )));
            }
            if mask & (1 << (i - 1)) != 0 {
                bail!(UsageError(format!("term {k}: repeated odd index {i}")));
            }
            mask |= 1 << (i - 1);
        }
        if subset.windows(2).any(|w| w[0] > w[1]) {
            bail!(UsageError(format!(
                "term {k}: subset {subset:?} must be ascending"
            )));
        }
        if subset.len() % 2 == 0 {
            bail!(UsageError(format!(
                "term {k}: subset {subset:?} has even size; the potential is odd"
            )));
        }
        let coefficient = parse_expression(&expr)?;
        if let Some(v) = coefficient.max_variable() {
            if v >= n {
                bail!(UsageError(format!("term {k}: u{} exceeds n = {n}", v + 1)));
            }
        }
        terms.push(PsiTerm { mask, coefficient });
    }
    Ok(terms)
}

pub fn potential_from_terms(n: usize, terms: Vec<PsiTerm>) -> Result<SuperPotential> {
    let components = terms
        .into_iter()
        .map(|t| {
            let e = Arc::new(t.coefficient);
            let f: CoefficientFn = Arc::new(move |u: &[Jet]| Ok(e.eval(u)));
            (t.mask, f)
        })
        .collect();
    Ok(SuperPotential::from_components(n, components)?)
}

pub fn read_potential(n: usize, path: &Path) -> Result<SuperPotential> {
    let text = crate::io::read_text(path)?;
    potential_from_terms(n, parse_terms(n, &text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use frobenius_core::jet::JetLayout;

    fn eval_at(src: &str, u: &[f64]) -> C64 {
        let layout = JetLayout::new(u.len(), 2);
        let jets: Vec<Jet> = u
            .iter()
            .enumerate()
            .map(|(k, &x)| Jet::variable(&layout, k, C64::new(x, 0.0)))
            .collect();
        parse_expression(src).unwrap().eval(&jets).value()
    }

    #[test]
    fn precedence_and_values() {
        assert!((eval_at("1 + 2*u1^2", &[3.0]) - C64::new(19.0, 0.0)).norm() < 1e-14);
        assert!((eval_at("-u1^2", &[3.0]) - C64::new(-9.0, 0.0)).norm() < 1e-14);
        assert!((eval_at("exp(u1 - u2)/2", &[1.0, 1.0]) - C64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((eval_at("(1+i)*u1", &[2.0]) - C64::new(2.0, 2.0)).norm() < 1e-14);
        assert!((eval_at("1.5e-1*u1", &[2.0]) - C64::new(0.3, 0.0)).norm() < 1e-14);
        assert!((eval_at("u1/(2*2)", &[2.0]) - C64::new(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn derivatives_follow_the_jets() {
        let layout = JetLayout::new(1, 2);
        let x = Jet::variable(&layout, 0, C64::new(0.5, 0.0));
        let f = parse_expression("exp(2*u1) * u1").unwrap().eval(&[x]);
        let d = f.derivative(0).unwrap().value();
        let expected = (1.0f64).exp() * (1.0 + 2.0 * 0.5);
        assert!((d - C64::new(expected, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn rejects_what_is_outside_the_grammar() {
        for bad in [
            "u0", "v1", "u1/u2", "u1^-1", "u1^1.5", "exp u1", "(u1", "u1 u2", "", "1/0", "sin(u1)",
        ] {
            assert!(parse_expression(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn term_files() {
        let ok = parse_terms(
            3,
            r#"[[[1], "u1"], {"subset": [1,2,3], "expr": "exp(u3)"}]"#,
        )
        .unwrap();
        assert_eq!(ok[0].mask, 0b001);
        assert_eq!(ok[1].mask, 0b111);
        assert!(parse_terms(3, r#"[[[1,2], "u1"]]"#).is_err());
        assert!(parse_terms(3, r#"[[[2,1,3], "u1"]]"#).is_err());
        assert!(parse_terms(2, r#"[[[1], "u3"]]"#).is_err());
        assert!(parse_terms(2, r#"{"not": "a list"}"#).is_err());
    }
}
