//! Finite Grassmann algebras with coefficients in a commutative ring.
//!
//! A monomial `theta^S` is indexed by the bitmask of `S` and always means the
//! product of its generators in increasing order. Derivatives in odd
//! directions act from the left.

use crate::jet::{Jet, JetLayout};
use crate::{Error, Result, C64};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use core::fmt::Debug;
use core::ops::{Add, Mul, Neg, Sub};

/// Largest supported number of odd generators.
pub const MAX_GENERATORS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_mask(mask: u32) -> Parity {
        if mask.count_ones().is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn is_odd(self) -> bool {
        self == Parity::Odd
    }

    /// Parity of a product.
    pub fn combine(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Commutative coefficient ring of a Grassmann algebra.
pub trait Coefficient: Clone + Debug {
    /// Zero with the same shape (for jets: the same layout).
    fn zero_like(&self) -> Self;
    /// Constant with the same shape.
    fn constant_like(&self, c: C64) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, c: C64) -> Self;
    /// Exact zero test (used to keep tables sparse).
    fn is_zero(&self) -> bool;
    /// Largest coefficient modulus.
    fn magnitude(&self) -> f64;
    fn recip(&self) -> Result<Self>;
    fn sqrt(&self) -> Result<Self>;
    fn exp(&self) -> Self;
    fn ln(&self) -> Result<Self>;
}

impl Coefficient for C64 {
    fn zero_like(&self) -> Self {
        C64::new(0.0, 0.0)
    }
    fn constant_like(&self, c: C64) -> Self {
        c
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, c: C64) -> Self {
        self * c
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn recip(&self) -> Result<Self> {
        if Coefficient::is_zero(self) {
            Err(Error::NonInvertible("zero body".into()))
        } else {
            Ok(self.inv())
        }
    }
    fn sqrt(&self) -> Result<Self> {
        Ok(C64::sqrt(*self))
    }
    fn exp(&self) -> Self {
        C64::exp(*self)
    }
    fn ln(&self) -> Result<Self> {
        if Coefficient::is_zero(self) {
            Err(Error::NonInvertible("logarithm of zero".into()))
        } else {
            Ok(C64::ln(*self))
        }
    }
}

impl Coefficient for Jet {
    fn zero_like(&self) -> Self {
        Jet::zero(self.layout())
    }
    fn constant_like(&self, c: C64) -> Self {
        Jet::constant(self.layout(), c)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, c: C64) -> Self {
        Jet::scale(self, c)
    }
    fn is_zero(&self) -> bool {
        self.coefficients()
            .iter()
            .all(|c| c.re == 0.0 && c.im == 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.max_abs()
    }
    fn recip(&self) -> Result<Self> {
        Jet::recip(self)
    }
    fn sqrt(&self) -> Result<Self> {
        Jet::sqrt(self)
    }
    fn exp(&self) -> Self {
        Jet::exp(self)
    }
    fn ln(&self) -> Result<Self> {
        Jet::ln(self)
    }
}

/// Element of the Grassmann algebra on `n` generators with coefficients in `T`.
#[derive(Clone, Debug)]
pub struct Grassmann<T> {
    generators: usize,
    proto: T,
    terms: BTreeMap<u32, T>,
}

/// Complex supernumber.
pub type GrassmannElement = Grassmann<C64>;

/// Supernumber whose coefficients are jets in the even directions.
pub type SuperJet = Grassmann<Jet>;

/// Number of sign-relevant transpositions to sort `theta^S theta^T`.
fn inversions(s: u32, t: u32) -> u32 {
    let mut count = 0;
    let mut rest = t;
    while rest != 0 {
        let k = rest.trailing_zeros();
        count += (s >> (k + 1)).count_ones();
        rest &= rest - 1;
    }
    count
}

impl<T: Coefficient> Grassmann<T> {
    /// The zero element; `proto` fixes the coefficient shape.
    pub fn zero(generators: usize, proto: &T) -> Self {
        assert!(
            generators <= MAX_GENERATORS,
            "at most {MAX_GENERATORS} generators"
        );
        Grassmann {
            generators,
            proto: proto.zero_like(),
            terms: BTreeMap::new(),
        }
    }

    pub fn scalar(generators: usize, value: T) -> Self {
        Self::monomial(generators, 0, value)
    }

    /// `value * theta^S` for the subset `mask`.
    pub fn monomial(generators: usize, mask: u32, value: T) -> Self {
        let mut x = Self::zero(generators, &value);
        assert!(
            generators == 32 || mask >> generators == 0,
            "mask {mask:#b} exceeds {generators} generators"
        );
        if !value.is_zero() {
            x.terms.insert(mask, value);
        }
        x
    }

    /// The generator `theta^k` (0-based).
    pub fn generator(generators: usize, k: usize, proto: &T) -> Self {
        Self::monomial(generators, 1 << k, proto.constant_like(C64::new(1.0, 0.0)))
    }

    /// Builds an element from `(mask, coefficient)` pairs; repeated masks add up.
    pub fn from_terms<I>(generators: usize, proto: &T, terms: I) -> Self
    where
        I: IntoIterator<Item = (u32, T)>,
    {
        let mut x = Self::zero(generators, proto);
        for (mask, c) in terms {
            x.add_term(mask, &c);
        }
        x
    }

    fn add_term(&mut self, mask: u32, c: &T) {
        if c.is_zero() {
            return;
        }
        let sum = match self.terms.get(&mask) {
            Some(old) => old.add(c),
            None => c.clone(),
        };
        if sum.is_zero() {
            self.terms.remove(&mask);
        } else {
            self.terms.insert(mask, sum);
        }
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    /// A zero coefficient of the right shape.
    pub fn proto(&self) -> &T {
        &self.proto
    }

    /// Nonzero terms ordered by bitmask.
    pub fn terms(&self) -> impl Iterator<Item = (u32, &T)> {
        self.terms.iter().map(|(&m, c)| (m, c))
    }

    pub fn coefficient(&self, mask: u32) -> T {
        self.terms
            .get(&mask)
            .cloned()
            .unwrap_or_else(|| self.proto.zero_like())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the empty monomial.
    pub fn body(&self) -> T {
        self.coefficient(0)
    }

    /// Everything except the body.
    pub fn soul(&self) -> Self {
        let mut s = self.clone();
        s.terms.remove(&0);
        s
    }

    /// Parity when homogeneous; `None` for mixed elements. Zero is even.
    pub fn parity(&self) -> Option<Parity> {
        let mut parities = self.terms.keys().map(|&m| Parity::of_mask(m));
        match parities.next() {
            None => Some(Parity::Even),
            Some(p) => parities.all(|q| q == p).then_some(p),
        }
    }

    pub fn even_part(&self) -> Self {
        self.filter(|m| m.count_ones() % 2 == 0)
    }

    pub fn odd_part(&self) -> Self {
        self.filter(|m| m.count_ones() % 2 == 1)
    }

    fn filter(&self, keep: impl Fn(u32) -> bool) -> Self {
        Grassmann {
            generators: self.generators,
            proto: self.proto.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(&m, _)| keep(m))
                .map(|(&m, c)| (m, c.clone()))
                .collect(),
        }
    }

    /// Grade involution `x -> (-1)^{|x|} x`.
    pub fn involution(&self) -> Self {
        self.map_terms(|m, c| {
            if m.count_ones() % 2 == 1 {
                c.scale(C64::new(-1.0, 0.0))
            } else {
                c.clone()
            }
        })
    }

    /// Keeps the parts of Grassmann degree `<= max_degree`.
    pub fn truncate_degree(&self, max_degree: u32) -> Self {
        self.filter(|m| m.count_ones() <= max_degree)
    }

    fn map_terms(&self, f: impl Fn(u32, &T) -> T) -> Self {
        let mut out = Self::zero(self.generators, &self.proto);
        for (&m, c) in &self.terms {
            out.add_term(m, &f(m, c));
        }
        out
    }

    /// Applies a map to every coefficient.
    pub fn map_coefficients<U: Coefficient>(&self, proto: &U, f: impl Fn(&T) -> U) -> Grassmann<U> {
        let mut out = Grassmann::zero(self.generators, proto);
        for (&m, c) in &self.terms {
            out.add_term(m, &f(c));
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map_terms(|_, c| c.scale(s))
    }

    /// Multiplication by a coefficient (which is even and central).
    pub fn mul_coefficient(&self, s: &T) -> Self {
        self.map_terms(|_, c| c.mul(s))
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms
            .values()
            .fold(0.0, |acc, c| acc.max(c.magnitude()))
    }

    fn check_compatible(&self, other: &Self) {
        assert_eq!(
            self.generators, other.generators,
            "Grassmann generator count mismatch"
        );
    }

    fn add_ref(&self, other: &Self) -> Self {
        self.check_compatible(other);
        let mut out = self.clone();
        for (&m, c) in &other.terms {
            out.add_term(m, c);
        }
        out
    }

    fn sub_ref(&self, other: &Self) -> Self {
        self.add_ref(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Product with the Koszul sign `(-1)^{#{s in S, t in T, s > t}}`.
    fn mul_ref(&self, other: &Self) -> Self {
        self.check_compatible(other);
        let mut out = Self::zero(self.generators, &self.proto);
        for (&s, a) in &self.terms {
            for (&t, b) in &other.terms {
                if s & t != 0 {
                    continue;
                }
                let c = a.mul(b);
                let c = if inversions(s, t) % 2 == 1 {
                    c.scale(C64::new(-1.0, 0.0))
                } else {
                    c
                };
                out.add_term(s | t, &c);
            }
        }
        out
    }

    /// `theta^k * self`.
    pub fn mul_generator(&self, k: usize) -> Self {
        let g = Self::generator(self.generators, k, &self.proto);
        g.mul_ref(self)
    }

    /// Left derivative `d/dtheta^k`.
    pub fn left_derivative(&self, k: usize) -> Self {
        assert!(k < self.generators, "generator {k} out of range");
        let bit = 1u32 << k;
        let mut out = Self::zero(self.generators, &self.proto);
        for (&m, c) in &self.terms {
            if m & bit == 0 {
                continue;
            }
            let before = (m & (bit - 1)).count_ones();
            let c = if before % 2 == 1 {
                c.scale(C64::new(-1.0, 0.0))
            } else {
                c.clone()
            };
            out.add_term(m & !bit, &c);
        }
        out
    }

    /// Sum of `coeffs[j] * soul^j` for `j <= generators`, using `s = soul / body`.
    fn soul_series(&self, body_factor: &T, series: impl Fn(usize) -> C64) -> Self {
        let body = self.body();
        let inv_body = body.recip().expect("caller checked the body");
        let nil = self.soul().mul_coefficient(&inv_body);
        let mut power = Self::scalar(
            self.generators,
            self.proto.constant_like(C64::new(1.0, 0.0)),
        );
        let mut acc = power.scale(series(0));
        for j in 1..=self.generators {
            power = power.mul_ref(&nil);
            if power.is_zero() {
                break;
            }
            acc = acc.add_ref(&power.scale(series(j)));
        }
        acc.mul_coefficient(body_factor)
    }

    fn check_body(&self, what: &str) -> Result<T> {
        let body = self.body();
        if body.is_zero() {
            return Err(Error::NonInvertible(format!(
                "{what} of an element with zero body"
            )));
        }
        body.recip()?;
        Ok(body)
    }

    /// Multiplicative inverse (terminating geometric series in the soul).
    pub fn inverse(&self) -> Result<Self> {
        let body = self.check_body("inverse")?;
        let inv = body.recip()?;
        Ok(self.soul_series(&inv, |j| {
            if j % 2 == 0 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(-1.0, 0.0)
            }
        }))
    }

    /// Square root of an even element, principal branch on the body.
    pub fn sqrt(&self) -> Result<Self> {
        if !self.odd_part().is_zero() {
            return Err(Error::Parity("square root of a non-even element".into()));
        }
        let body = self.check_body("square root")?;
        let root = body.sqrt()?;
        Ok(self.soul_series(&root, |j| C64::new(binomial_half(j), 0.0)))
    }

    pub fn exp(&self) -> Self {
        let body = self.body();
        let e = body.exp();
        let nil = self.soul();
        let mut power = Self::scalar(
            self.generators,
            self.proto.constant_like(C64::new(1.0, 0.0)),
        );
        let mut acc = power.clone();
        let mut fact = 1.0;
        for j in 1..=self.generators {
            power = power.mul_ref(&nil);
            if power.is_zero() {
                break;
            }
            fact *= j as f64;
            acc = acc.add_ref(&power.scale(C64::new(1.0 / fact, 0.0)));
        }
        acc.mul_coefficient(&e)
    }

    /// Principal logarithm of the body plus the terminating soul series.
    pub fn ln(&self) -> Result<Self> {
        let body = self.check_body("logarithm")?;
        let log_body = body.ln()?;
        let series = self.soul_series(&self.proto.constant_like(C64::new(1.0, 0.0)), |j| {
            if j == 0 {
                C64::new(0.0, 0.0)
            } else {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                C64::new(sign / j as f64, 0.0)
            }
        });
        Ok(series.add_ref(&Self::scalar(self.generators, log_body)))
    }
}

/// `binom(1/2, j)`.
fn binomial_half(j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (0.5 - i as f64) / (i as f64 + 1.0))
}

macro_rules! grassmann_ops {
    ($tr:ident, $method:ident, $inner:ident) => {
        impl<'a, T: Coefficient> $tr<&'a Grassmann<T>> for &'a Grassmann<T> {
            type Output = Grassmann<T>;
            fn $method(self, rhs: &'a Grassmann<T>) -> Grassmann<T> {
                self.$inner(rhs)
            }
        }
        impl<T: Coefficient> $tr<Grassmann<T>> for Grassmann<T> {
            type Output = Grassmann<T>;
            fn $method(self, rhs: Grassmann<T>) -> Grassmann<T> {
                self.$inner(&rhs)
            }
        }
    };
}
grassmann_ops!(Add, add, add_ref);
grassmann_ops!(Sub, sub, sub_ref);
grassmann_ops!(Mul, mul, mul_ref);

impl<T: Coefficient> Neg for &Grassmann<T> {
    type Output = Grassmann<T>;
    fn neg(self) -> Grassmann<T> {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl<T: Coefficient> Neg for Grassmann<T> {
    type Output = Grassmann<T>;
    fn neg(self) -> Grassmann<T> {
        -&self
    }
}

impl GrassmannElement {
    /// Complex constant.
    pub fn constant(generators: usize, c: C64) -> Self {
        Self::scalar(generators, c)
    }
}

/// Parity, body and soul in one call.
pub fn parity_body<T: Coefficient>(x: &Grassmann<T>) -> (Option<Parity>, T, Grassmann<T>) {
    (x.parity(), x.body(), x.soul())
}

impl SuperJet {
    /// Constant supernumber with jets of the given layout.
    pub fn constant_jet(generators: usize, layout: &Arc<JetLayout>, c: C64) -> Self {
        Self::scalar(generators, Jet::constant(layout, c))
    }

    /// The even coordinate `u^v` (jet variable `v`) expanded around `value`.
    pub fn even_coordinate(
        generators: usize,
        layout: &Arc<JetLayout>,
        v: usize,
        value: C64,
    ) -> Self {
        Self::scalar(generators, Jet::variable(layout, v, value))
    }

    /// `d/du^v` applied coefficientwise; lowers the jet order by one.
    pub fn even_derivative(&self, v: usize) -> Result<Self> {
        let proto = Jet::zero(self.proto().layout());
        let mut out = Grassmann::zero(self.generators(), &proto);
        for (m, c) in self.terms() {
            out.add_term(m, &c.derivative(v)?);
        }
        Ok(out)
    }

    /// The supersymmetric field `e_k = d/dtheta^k + theta^k d/du^k`.
    pub fn susy_derivative(&self, k: usize) -> Result<Self> {
        let odd = self.left_derivative(k);
        let even = self.even_derivative(k)?.mul_generator(k);
        Ok(odd.add_ref(&even))
    }

    /// Value of every coefficient at the expansion point.
    pub fn at_point(&self) -> GrassmannElement {
        self.map_coefficients(&C64::new(0.0, 0.0), |j| j.value())
    }

    /// Smallest trustworthy jet order among the coefficients.
    pub fn order(&self) -> usize {
        self.terms()
            .map(|(_, c)| c.order())
            .min()
            .unwrap_or(self.proto().layout().order())
    }
}

/// Which derivation to apply in [`derivation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Derivation {
    /// Left derivative `d/dtheta^k`.
    Odd(usize),
    /// `d/du^k` through the jet.
    Even(usize),
    /// `e_k = d/dtheta^k + theta^k d/du^k`.
    Susy(usize),
}

/// A superfunction evaluated as a super jet around a point.
pub trait SuperFunction {
    fn generators(&self) -> usize;
    fn parity(&self) -> Parity;
    /// Expansion around `u` with jets of the given order in `u.len()` variables.
    fn evaluate(&self, u: &[C64], order: usize) -> Result<SuperJet>;
}

/// Applies a derivation to a superfunction at `u`; the result is read off at the point.
pub fn derivation<F: SuperFunction + ?Sized>(
    f: &F,
    u: &[C64],
    order: usize,
    which: Derivation,
) -> Result<GrassmannElement> {
    if order == 0 && !matches!(which, Derivation::Odd(_)) {
        return Err(Error::JetOrder(
            "even derivatives need jet order >= 1".into(),
        ));
    }
    let jet = f.evaluate(u, order)?;
    let k = match which {
        Derivation::Odd(k) | Derivation::Even(k) | Derivation::Susy(k) => k,
    };
    if k >= f.generators() || k >= u.len() {
        return Err(Error::InvalidParameter(format!(
            "direction {k} out of range"
        )));
    }
    let out = match which {
        Derivation::Odd(k) => jet.left_derivative(k),
        Derivation::Even(k) => jet.even_derivative(k)?,
        Derivation::Susy(k) => jet.susy_derivative(k)?,
    };
    Ok(out.at_point())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn theta(n: usize, k: usize) -> GrassmannElement {
        GrassmannElement::generator(n, k, &c(0.0))
    }

    fn one(n: usize) -> GrassmannElement {
        GrassmannElement::constant(n, c(1.0))
    }

    #[test]
    fn nilpotency_and_anticommutation() {
        let t1 = theta(2, 0);
        let t2 = theta(2, 1);
        assert!((&t1 * &t1).is_zero());
        let a = &t1 * &t2;
        let b = &t2 * &t1;
        assert!((&a + &b).is_zero());
        assert_eq!(a.coefficient(0b11), c(1.0));
    }

    #[test]
    fn terminating_series() {
        let x = &one(2) + &(&theta(2, 0) * &theta(2, 1));
        let s = x.sqrt().unwrap();
        assert_eq!(s.coefficient(0), c(1.0));
        assert_eq!(s.coefficient(0b11), c(0.5));
        let inv = x.inverse().unwrap();
        assert_eq!(inv.coefficient(0b11), c(-1.0));
        assert!(theta(2, 0).inverse().is_err());
        assert!(theta(2, 0).sqrt().is_err());
    }

    #[test]
    fn left_derivative_sign() {
        let t12 = &theta(2, 0) * &theta(2, 1);
        assert_eq!(t12.left_derivative(0).coefficient(0b10), c(1.0));
        assert_eq!(t12.left_derivative(1).coefficient(0b01), c(-1.0));
    }

    #[test]
    fn parity_and_body() {
        let x = &GrassmannElement::constant(2, c(3.0)) + &(&theta(2, 0) * &theta(2, 1));
        let (p, body, soul) = parity_body(&x);
        assert_eq!(p, Some(Parity::Even));
        assert_eq!(body, c(3.0));
        assert_eq!(soul.coefficient(0b11), c(1.0));
        assert_eq!(theta(2, 0).parity(), Some(Parity::Odd));
        assert!(GrassmannElement::constant(2, c(5.0)).soul().is_zero());
        assert_eq!((&one(2) + &theta(2, 0)).parity(), None);
    }

    #[test]
    fn exp_and_ln_round_trip() {
        let x = &(&GrassmannElement::constant(3, c(0.7))
            + &(&theta(3, 0) * &theta(3, 1)).scale(c(2.0)))
            + &(&theta(3, 1) * &theta(3, 2));
        let back = x.exp().ln().unwrap();
        assert!((&back - &x).max_abs() < 1e-14);
    }

    #[test]
    fn susy_fields_square_to_even_derivative() {
        let layout = JetLayout::new(2, 3);
        let u1 = SuperJet::even_coordinate(2, &layout, 0, c(0.4));
        let u2 = SuperJet::even_coordinate(2, &layout, 1, c(-0.2));
        let t1 = SuperJet::generator(2, 0, &Jet::zero(&layout));
        let t2 = SuperJet::generator(2, 1, &Jet::zero(&layout));
        // f = theta^1 u1^2 u2 + theta^2 exp(u1) + theta^1 theta^2 u2
        let f = (&t1 * &(&(&u1 * &u1) * &u2)) + (&t2 * &u1.exp()) + (&(&t1 * &t2) * &u2);
        for a in 0..2 {
            for b in 0..2 {
                let ab = f.susy_derivative(b).unwrap().susy_derivative(a).unwrap();
                let ba = f.susy_derivative(a).unwrap().susy_derivative(b).unwrap();
                let anti = (&ab + &ba).at_point();
                let expected = if a == b {
                    f.even_derivative(a).unwrap().scale(c(2.0)).at_point()
                } else {
                    GrassmannElement::zero(2, &c(0.0))
                };
                assert!((&anti - &expected).max_abs() < 1e-13, "a={a} b={b}");
            }
        }
    }
}
