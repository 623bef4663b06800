//! Truncated multivariate Taylor polynomials ("jets") with complex coefficients.
//!
//! A jet of order `k` in `m` variables stores the Taylor coefficients `c_a`
//! of `f(u0 + delta) = sum_{|a| <= k} c_a delta^a`. Jets sharing a
//! [`JetLayout`] can be combined; the layout caches the monomial list, the
//! multiplication table and the derivative maps.

use crate::{Error, Result, C64};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

/// Monomial bookkeeping shared by all jets with the same shape.
#[derive(Debug)]
pub struct JetLayout {
    vars: usize,
    order: usize,
    monomials: Vec<Vec<u32>>,
    degrees: Vec<usize>,
    index: BTreeMap<Vec<u32>, usize>,
    /// `(i, j, k, degree of k)` with `mono[i] + mono[j] = mono[k]`.
    products: Vec<(usize, usize, usize, usize)>,
    /// Per variable: `(source, target, factor)` for `d/du_v`.
    derivatives: Vec<Vec<(usize, usize, f64)>>,
}

impl JetLayout {
    pub fn new(vars: usize, order: usize) -> Arc<Self> {
        let mut monomials = Vec::new();
        for degree in 0..=order {
            let mut current = vec![0u32; vars];
            push_monomials(vars, degree as u32, 0, &mut current, &mut monomials);
        }
        let degrees: Vec<usize> = monomials
            .iter()
            .map(|m| m.iter().sum::<u32>() as usize)
            .collect();
        let index: BTreeMap<Vec<u32>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mut products = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                if degrees[i] + degrees[j] > order {
                    continue;
                }
                let sum: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i, j, index[&sum], degrees[i] + degrees[j]));
            }
        }
        let derivatives = (0..vars)
            .map(|v| {
                monomials
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| m[v] > 0)
                    .map(|(i, m)| {
                        let mut lower = m.clone();
                        lower[v] -= 1;
                        (i, index[&lower], f64::from(m[v]))
                    })
                    .collect()
            })
            .collect();
        Arc::new(JetLayout {
            vars,
            order,
            monomials,
            degrees,
            index,
            products,
            derivatives,
        })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Exponent vectors, ordered by total degree.
    pub fn monomials(&self) -> &[Vec<u32>] {
        &self.monomials
    }
}

/// Emits the monomials of a fixed degree in lexicographically decreasing order of exponents.
fn push_monomials(
    vars: usize,
    remaining: u32,
    pos: usize,
    current: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if pos + 1 == vars || vars == 0 {
        if vars > 0 {
            current[pos] = remaining;
            out.push(current.clone());
            current[pos] = 0;
        } else if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        push_monomials(vars, remaining - k, pos + 1, current, out);
    }
    current[pos] = 0;
}

/// A truncated Taylor polynomial.
#[derive(Clone, Debug)]
pub struct Jet {
    layout: Arc<JetLayout>,
    order: usize,
    coeffs: Vec<C64>,
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.coeffs == other.coeffs
    }
}

impl Jet {
    pub fn constant(layout: &Arc<JetLayout>, value: C64) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); layout.len()];
        coeffs[0] = value;
        Jet {
            layout: layout.clone(),
            order: layout.order,
            coeffs,
        }
    }

    pub fn zero(layout: &Arc<JetLayout>) -> Self {
        Self::constant(layout, C64::new(0.0, 0.0))
    }

    /// The coordinate function `u_v` expanded around `value`.
    pub fn variable(layout: &Arc<JetLayout>, v: usize, value: C64) -> Self {
        let mut jet = Self::constant(layout, value);
        if layout.order >= 1 {
            let mut e = vec![0u32; layout.vars];
            e[v] = 1;
            jet.coeffs[layout.index[&e]] = C64::new(1.0, 0.0);
        }
        jet
    }

    /// Builds a jet from Taylor coefficients listed in layout order.
    pub fn from_coefficients(layout: &Arc<JetLayout>, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != layout.len() {
            return Err(Error::InvalidParameter(format!(
                "{} coefficients for a layout of {} monomials",
                coeffs.len(),
                layout.len()
            )));
        }
        Ok(Jet {
            layout: layout.clone(),
            order: layout.order,
            coeffs,
        })
    }

    pub fn layout(&self) -> &Arc<JetLayout> {
        &self.layout
    }

    /// Number of trustworthy orders (drops by one per derivative).
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coeffs
    }

    /// Value at the expansion point.
    pub fn value(&self) -> C64 {
        self.coeffs[0]
    }

    /// Taylor coefficient of `delta^exps`.
    pub fn coefficient(&self, exps: &[u32]) -> Option<C64> {
        self.layout.index.get(exps).map(|&i| self.coeffs[i])
    }

    /// Partial derivative `d^exps f` at the expansion point.
    pub fn partial(&self, exps: &[u32]) -> Result<C64> {
        let total: u32 = exps.iter().sum();
        if total as usize > self.order {
            return Err(Error::JetOrder(format!(
                "derivative of order {total} from a jet of order {}",
                self.order
            )));
        }
        let c = self
            .coefficient(exps)
            .ok_or_else(|| Error::InvalidParameter("exponent length mismatch".into()))?;
        let scale: f64 = exps
            .iter()
            .map(|&k| (1..=k).map(f64::from).product::<f64>())
            .product();
        Ok(c * scale)
    }

    /// `d/du_v`; the result is one order shorter.
    pub fn derivative(&self, v: usize) -> Result<Jet> {
        if self.order == 0 {
            return Err(Error::JetOrder(
                "cannot differentiate a jet of order 0".into(),
            ));
        }
        if v >= self.layout.vars {
            return Err(Error::InvalidParameter(format!(
                "variable {v} out of range"
            )));
        }
        let mut coeffs = vec![C64::new(0.0, 0.0); self.coeffs.len()];
        for &(src, dst, factor) in &self.layout.derivatives[v] {
            if self.layout.degrees[src] <= self.order {
                coeffs[dst] += self.coeffs[src] * factor;
            }
        }
        let mut out = Jet {
            layout: self.layout.clone(),
            order: self.order - 1,
            coeffs,
        };
        out.truncate();
        Ok(out)
    }

    fn truncate(&mut self) {
        for (c, &d) in self.coeffs.iter_mut().zip(&self.layout.degrees) {
            if d > self.order {
                *c = C64::new(0.0, 0.0);
            }
        }
    }

    pub fn scale(&self, s: C64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc.max(c.norm()))
    }

    /// `f(self)` for an analytic `f` given by its Taylor coefficients
    /// `f^(k)(value) / k!`, `k = 0..=order`.
    pub fn compose(&self, taylor: &[C64]) -> Jet {
        let value = self.value();
        let mut nil = self.clone();
        nil.coeffs[0] -= value;
        let mut acc = Jet::constant(&self.layout, taylor[self.order.min(taylor.len() - 1)]);
        acc.order = self.order;
        for k in (0..self.order.min(taylor.len() - 1)).rev() {
            acc = &acc * &nil;
            acc.coeffs[0] += taylor[k];
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let taylor: Vec<C64> = (0..=self.order)
            .scan(C64::new(1.0, 0.0), |fact, k| {
                if k > 0 {
                    *fact *= k as f64;
                }
                Some(e / *fact)
            })
            .collect();
        self.compose(&taylor)
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Result<Jet> {
        let a = self.value();
        if a.norm() == 0.0 {
            return Err(Error::NonInvertible(
                "logarithm of a jet with zero value".into(),
            ));
        }
        let mut taylor = vec![a.ln()];
        for k in 1..=self.order {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            taylor.push(a.powi(-(k as i32)) * (sign / k as f64));
        }
        Ok(self.compose(&taylor))
    }

    pub fn recip(&self) -> Result<Jet> {
        let a = self.value();
        if a.norm() == 0.0 {
            return Err(Error::NonInvertible(
                "reciprocal of a jet with zero value".into(),
            ));
        }
        let taylor: Vec<C64> = (0..=self.order)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                a.powi(-(k as i32 + 1)) * sign
            })
            .collect();
        Ok(self.compose(&taylor))
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Result<Jet> {
        self.powf(0.5)
    }

    /// `self^p` on the principal branch.
    pub fn powf(&self, p: f64) -> Result<Jet> {
        let a = self.value();
        if a.norm() == 0.0 {
            return Err(Error::NonInvertible(
                "power of a jet with zero value".into(),
            ));
        }
        let base = a.powf(p);
        let mut taylor = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        for k in 0..=self.order {
            if k > 0 {
                binom *= (p - (k as f64 - 1.0)) / k as f64;
            }
            taylor.push(base * a.powi(-(k as i32)) * binom);
        }
        Ok(self.compose(&taylor))
    }

    /// Non-negative integer power by repeated multiplication.
    pub fn powu(&self, k: u32) -> Jet {
        let mut acc = Jet::constant(&self.layout, C64::new(1.0, 0.0));
        acc.order = self.order;
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &'a Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        let mut out = Jet {
            layout: self.layout.clone(),
            order,
            coeffs,
        };
        if order < self.order.max(rhs.order) {
            out.truncate();
        }
        out
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &'a Jet) -> Jet {
        self + &(-rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &'a Jet) -> Jet {
        debug_assert_eq!(self.layout.vars, rhs.layout.vars);
        let order = self.order.min(rhs.order);
        let mut coeffs = vec![C64::new(0.0, 0.0); self.coeffs.len()];
        for &(i, j, k, deg) in &self.layout.products {
            if deg <= order {
                coeffs[k] += self.coeffs[i] * rhs.coeffs[j];
            }
        }
        Jet {
            layout: self.layout.clone(),
            order,
            coeffs,
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn layout_counts() {
        let l = JetLayout::new(3, 2);
        assert_eq!(l.len(), 10);
        assert_eq!(l.monomials()[0], vec![0, 0, 0]);
        let l0 = JetLayout::new(0, 3);
        assert_eq!(l0.len(), 1);
    }

    #[test]
    fn product_rule_and_partials() {
        let l = JetLayout::new(2, 3);
        let x = Jet::variable(&l, 0, c(0.5));
        let y = Jet::variable(&l, 1, c(-1.0));
        let f = &(&x * &x) * &y; // x^2 y
        assert!((f.value() - c(-0.25)).norm() < 1e-15);
        assert!((f.partial(&[1, 0]).unwrap() - c(-1.0)).norm() < 1e-15);
        assert!((f.partial(&[1, 1]).unwrap() - c(1.0)).norm() < 1e-15);
        assert!((f.partial(&[2, 1]).unwrap() - c(2.0)).norm() < 1e-15);
        let fx = f.derivative(0).unwrap();
        assert_eq!(fx.order(), 2);
        assert!((fx.partial(&[1, 1]).unwrap() - c(2.0)).norm() < 1e-15);
        assert!(fx.partial(&[2, 1]).is_err());
    }

    #[test]
    fn elementary_functions() {
        let l = JetLayout::new(1, 4);
        let x = Jet::variable(&l, 0, c(0.3));
        let e = x.exp();
        for k in 0..=4 {
            assert!((e.partial(&[k]).unwrap() - c(0.3f64.exp())).norm() < 1e-13);
        }
        let r = x.recip().unwrap();
        assert!((&(&r * &x) - &Jet::constant(&l, c(1.0))).max_abs() < 1e-13);
        let s = x.sqrt().unwrap();
        assert!((&(&s * &s) - &x).max_abs() < 1e-13);
        let lg = x.exp().ln().unwrap();
        assert!((&lg - &x).max_abs() < 1e-13);
    }
}
