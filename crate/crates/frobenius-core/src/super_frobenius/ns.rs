//! Exact check of the Neveu-Schwarz relations for the fields built from the
//! Euler field and the odd identity.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};
use num_rational::Rational64;
use num_traits::{One, Signed, Zero};

/// Polynomial in even `u^1..u^n` and odd `theta^1..theta^n` with rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Polynomial {
    /// `(exponents of u, mask of theta) -> coefficient`; theta factors in increasing order.
    terms: BTreeMap<(Vec<u32>, u32), Rational64>,
}

fn koszul(s: u32, t: u32) -> bool {
    let mut count = 0;
    let mut rest = t;
    while rest != 0 {
        let k = rest.trailing_zeros();
        count += (s >> (k + 1)).count_ones();
        rest &= rest - 1;
    }
    count % 2 == 1
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(exps: Vec<u32>, mask: u32, c: Rational64) -> Self {
        let mut p = Self::zero();
        p.add_term(exps, mask, c);
        p
    }

    fn add_term(&mut self, exps: Vec<u32>, mask: u32, c: Rational64) {
        if c.is_zero() {
            return;
        }
        let key = (exps, mask);
        let entry = self
            .terms
            .entry(key.clone())
            .or_insert_with(Rational64::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, u32, &Rational64)> {
        self.terms.iter().map(|((e, m), c)| (e, *m, c))
    }

    /// Parity when homogeneous: `Some(true)` for odd.
    pub fn odd(&self) -> Option<bool> {
        let mut parity = None;
        for (_, m, _) in self.terms() {
            let p = m.count_ones() % 2 == 1;
            match parity {
                None => parity = Some(p),
                Some(q) if q != p => return None,
                _ => {}
            }
        }
        parity
    }

    pub fn scale(&self, c: Rational64) -> Self {
        let mut out = Self::zero();
        for (e, m, x) in self.terms() {
            out.add_term(e.clone(), m, *x * c);
        }
        out
    }

    /// `d/du^k`.
    pub fn even_derivative(&self, k: usize) -> Self {
        let mut out = Self::zero();
        for (e, m, c) in self.terms() {
            if e[k] == 0 {
                continue;
            }
            let mut f = e.clone();
            f[k] -= 1;
            out.add_term(f, m, *c * Rational64::from_integer(e[k] as i64));
        }
        out
    }

    /// Left derivative `d/dtheta^k`.
    pub fn odd_derivative(&self, k: usize) -> Self {
        let bit = 1u32 << k;
        let mut out = Self::zero();
        for (e, m, c) in self.terms() {
            if m & bit == 0 {
                continue;
            }
            let sign = if (m & (bit - 1)).count_ones() % 2 == 1 {
                -*c
            } else {
                *c
            };
            out.add_term(e.clone(), m & !bit, sign);
        }
        out
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> Rational64 {
        self.terms
            .values()
            .map(|c| c.abs())
            .fold(Rational64::zero(), |a, b| if b > a { b } else { a })
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (e, m, c) in rhs.terms() {
            out.add_term(e.clone(), m, *c);
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-Rational64::one())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (e, s, a) in self.terms() {
            for (f, t, b) in rhs.terms() {
                if s & t != 0 {
                    continue;
                }
                let exps: Vec<u32> = e.iter().zip(f).map(|(x, y)| x + y).collect();
                let c = if koszul(s, t) { -(*a * *b) } else { *a * *b };
                out.add_term(exps, s | t, c);
            }
        }
        out
    }
}

/// Vector field `sum X^k d_k` with coefficients on the left, in the basis
/// `(d/du^1, .., d/du^n, d/dtheta^1, .., d/dtheta^n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyField {
    pub n: usize,
    pub odd: bool,
    pub components: Vec<Polynomial>,
}

impl PolyField {
    pub fn zero(n: usize, odd: bool) -> Self {
        PolyField {
            n,
            odd,
            components: vec![Polynomial::zero(); 2 * n],
        }
    }

    /// `X(f)`.
    pub fn apply(&self, f: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for k in 0..self.n {
            out = &out + &(&self.components[k] * &f.even_derivative(k));
            out = &out + &(&self.components[self.n + k] * &f.odd_derivative(k));
        }
        out
    }

    /// Supercommutator `[X, Y]^k = X(Y^k) - (-1)^{|X||Y|} Y(X^k)`.
    pub fn bracket(&self, other: &PolyField) -> PolyField {
        let odd = self.odd ^ other.odd;
        let both_odd = self.odd && other.odd;
        let components = (0..2 * self.n)
            .map(|k| {
                let first = self.apply(&other.components[k]);
                let second = other.apply(&self.components[k]);
                if both_odd {
                    &first + &second
                } else {
                    &first - &second
                }
            })
            .collect();
        PolyField {
            n: self.n,
            odd,
            components,
        }
    }

    pub fn scale(&self, c: Rational64) -> PolyField {
        PolyField {
            n: self.n,
            odd: self.odd,
            components: self.components.iter().map(|p| p.scale(c)).collect(),
        }
    }

    pub fn sub(&self, other: &PolyField) -> PolyField {
        PolyField {
            n: self.n,
            odd: self.odd,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> Rational64 {
        self.components
            .iter()
            .map(Polynomial::max_abs)
            .fold(Rational64::zero(), |a, b| if b > a { b } else { a })
    }

    /// `E^{o(a+1)} = sum_k (u^k)^{a+1} d/du^k + (a+1)/2 (u^k)^a theta^k d/dtheta^k` for `a >= -1`.
    pub fn even_generator(n: usize, a: i64) -> PolyField {
        assert!(a >= -1, "even generators start at a = -1");
        let mut f = PolyField::zero(n, false);
        for k in 0..n {
            let mut e = vec![0u32; n];
            e[k] = (a + 1) as u32;
            f.components[k] = Polynomial::monomial(e.clone(), 0, Rational64::one());
            if a >= 0 {
                e[k] = a as u32;
                f.components[n + k] = Polynomial::monomial(e, 1 << k, Rational64::new(a + 1, 2));
            }
        }
        f
    }

    /// `sum_k (u^k)^{j+1} (d/dtheta^k + theta^k d/du^k)`, the odd generator of index `j + 1/2`, `j >= -1`.
    pub fn odd_generator(n: usize, j: i64) -> PolyField {
        assert!(j >= -1, "odd generators start at index -1/2");
        let mut f = PolyField::zero(n, true);
        for k in 0..n {
            let mut e = vec![0u32; n];
            e[k] = (j + 1) as u32;
            f.components[n + k] = Polynomial::monomial(e.clone(), 0, Rational64::one());
            f.components[k] = Polynomial::monomial(e, 1 << k, Rational64::one());
        }
        f
    }
}

/// Outcome of the commutator checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NsReport {
    pub n: usize,
    pub relations_checked: usize,
    /// Largest coefficient of any relation's difference (exactly zero when all hold).
    pub max_residual: Rational64,
    pub failures: Vec<String>,
}

impl NsReport {
    pub fn passed(&self) -> bool {
        self.max_residual.is_zero()
    }
}

/// Checks `[e_a, e_b] = (b - a) e_{a+b}`, `[e_a, f_i] = (i - a/2) f_{i+a}` and
/// `[f_i, f_j] = 2 e_{i+j}` for `-1 <= a, b <= a_max` and half-integers
/// `-1/2 <= i, j <= j_max + 1/2`.
pub fn ns_representation_check(n: usize, a_max: i64, j_max: i64) -> NsReport {
    let evens: Vec<PolyField> = (-1..=a_max)
        .map(|a| PolyField::even_generator(n, a))
        .collect();
    let odds: Vec<PolyField> = (-1..=j_max)
        .map(|j| PolyField::odd_generator(n, j))
        .collect();
    let mut report = NsReport {
        n,
        relations_checked: 0,
        max_residual: Rational64::zero(),
        failures: Vec::new(),
    };
    let mut record = |name: String, lhs: PolyField, rhs: PolyField| {
        let r = lhs.sub(&rhs).max_abs();
        report.relations_checked += 1;
        if !r.is_zero() {
            report.failures.push(name);
            if r > report.max_residual {
                report.max_residual = r;
            }
        }
    };
    for (ia, a) in (-1..=a_max).enumerate() {
        for (ib, b) in (-1..=a_max).enumerate() {
            let rhs = if a + b >= -1 {
                PolyField::even_generator(n, a + b).scale(Rational64::from_integer(b - a))
            } else {
                PolyField::zero(n, false)
            };
            record(
                format!("[e_{a}, e_{b}]"),
                evens[ia].bracket(&evens[ib]),
                rhs,
            );
        }
        for (jj, j) in (-1..=j_max).enumerate() {
            // index i = j + 1/2; i - a/2 = (2j + 1 - a)/2; f_{i+a} has j' = j + a
            let rhs = if j + a >= -1 {
                PolyField::odd_generator(n, j + a).scale(Rational64::new(2 * j + 1 - a, 2))
            } else {
                PolyField::zero(n, true)
            };
            record(
                format!("[e_{a}, f_{}/2]", 2 * j + 1),
                evens[ia].bracket(&odds[jj]),
                rhs,
            );
        }
    }
    for (ji, j) in (-1..=j_max).enumerate() {
        for (jk, k) in (-1..=j_max).enumerate() {
            // i + i' = j + k + 1
            let rhs = PolyField::even_generator(n, j + k + 1).scale(Rational64::from_integer(2));
            record(
                format!("[f_{}/2, f_{}/2]", 2 * j + 1, 2 * k + 1),
                odds[ji].bracket(&odds[jk]),
                rhs,
            );
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> Rational64 {
        Rational64::from_integer(n)
    }

    #[test]
    fn paper_examples() {
        let n = 2;
        let e0 = PolyField::even_generator(n, 0);
        let e1 = PolyField::even_generator(n, 1);
        assert_eq!(e0.bracket(&e1), e1);
        let f_half = PolyField::odd_generator(n, 0);
        assert_eq!(f_half.bracket(&f_half), e1.scale(r(2)));
        assert_eq!(e0.bracket(&f_half), f_half.scale(Rational64::new(1, 2)));
    }

    #[test]
    fn full_relations_for_three_odd_coordinates() {
        let report = ns_representation_check(3, 4, 3);
        assert!(report.passed(), "{:?}", report.failures);
        assert_eq!(report.relations_checked, 6 * 6 + 6 * 5 + 5 * 5);
    }

    #[test]
    fn a_wrong_structure_constant_is_detected() {
        let e0 = PolyField::even_generator(1, 0);
        let f = PolyField::odd_generator(1, 1);
        let wrong = f.scale(r(1));
        assert!(!e0.bracket(&f).sub(&wrong).max_abs().is_zero());
    }

    #[test]
    fn polynomial_products_follow_koszul_signs() {
        let t1 = Polynomial::monomial(vec![0, 0], 0b01, r(1));
        let t2 = Polynomial::monomial(vec![0, 0], 0b10, r(1));
        assert_eq!(&(&t1 * &t2) + &(&t2 * &t1), Polynomial::zero());
        assert!((&t1 * &t1).is_zero());
        let p = &(&t1 * &t2) + &Polynomial::monomial(vec![2, 1], 0, r(3));
        assert_eq!(
            p.odd_derivative(1),
            Polynomial::monomial(vec![0, 0], 0b01, r(-1))
        );
        assert_eq!(
            p.even_derivative(0),
            Polynomial::monomial(vec![1, 1], 0, r(6))
        );
        assert_eq!(p.odd(), Some(false));
    }
}
