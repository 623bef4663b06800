//! Small numeric helpers: compensated summation and finite differences.

use crate::C64;
use alloc::vec::Vec;

/// Neumaier compensated accumulator for complex sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: (f64, f64),
    im: (f64, f64),
}

fn neumaier(acc: &mut (f64, f64), x: f64) {
    let (sum, comp) = *acc;
    let t = sum + x;
    let c = if sum.abs() >= x.abs() {
        (sum - t) + x
    } else {
        (x - t) + sum
    };
    *acc = (t, comp + c);
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: C64) {
        neumaier(&mut self.re, z.re);
        neumaier(&mut self.im, z.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

/// Default finite-difference step `1e-5 * (1 + |x|)`.
pub fn default_step(x: C64) -> f64 {
    1e-5 * (1.0 + x.norm())
}

/// Central difference of a vector-valued function along a real parameter,
/// extrapolated once with Richardson's rule.
///
/// `f(s)` is evaluated at `s = ±h, ±h/2`.
pub fn central_richardson<F>(mut f: F, h: f64) -> Vec<C64>
where
    F: FnMut(f64) -> Vec<C64>,
{
    let mut d = |step: f64| -> Vec<C64> {
        let plus = f(step);
        let minus = f(-step);
        plus.iter()
            .zip(minus.iter())
            .map(|(p, m)| (p - m) / (2.0 * step))
            .collect()
    };
    let coarse = d(h);
    let fine = d(h / 2.0);
    fine.iter()
        .zip(coarse.iter())
        .map(|(fi, co)| (fi * 4.0 - co) / 3.0)
        .collect()
}

/// Maximum modulus over a slice; zero for an empty slice.
pub fn max_abs(values: &[C64]) -> f64 {
    values.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Maximum modulus of the difference of two equally long slices.
pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Principal square root of a complex number (branch cut on the negative axis).
pub fn principal_sqrt(z: C64) -> C64 {
    z.sqrt()
}

/// Factorial as `f64` (exact for the small arguments used here).
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Binomial coefficient as `f64`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `true` when `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * 1.0f64.max(a.norm()).max(b.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(C64::new(1e16, 0.0));
        s.add(C64::new(1.0, 1.0));
        s.add(C64::new(-1e16, 0.0));
        assert_eq!(s.value(), C64::new(1.0, 1.0));
    }

    #[test]
    fn richardson_derivative_of_exp() {
        let d = central_richardson(|s| alloc::vec![C64::new(s, 0.0).exp()], 1e-3);
        assert!((d[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert_eq!(factorial(5), 120.0);
    }
}
