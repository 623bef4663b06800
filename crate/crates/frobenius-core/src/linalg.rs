//! Dense complex linear algebra helpers on top of `nalgebra`.

use crate::{Error, Result, C64};
use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Diagonal matrix from a slice.
pub fn diag(values: &[C64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(values))
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `[a, b] = ab - ba`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Eigenvalues of a general complex matrix via the complex Schur form.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    m.clone()
        .try_schur(1e-15, 10_000)
        .and_then(|s| s.eigenvalues().map(|e| e.iter().copied().collect()))
        .ok_or_else(|| Error::InvalidModel("Schur decomposition did not converge".into()))
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    s
}

/// Ratio of extreme singular values (infinite for singular matrices).
pub fn condition_number(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Right singular vector of the smallest singular value, with that value.
pub fn null_vector(m: &CMat) -> (CVec, f64) {
    let n = m.ncols();
    // Pad wide matrices with zero rows so that V^H is square.
    let square = if m.nrows() < n {
        let mut padded = CMat::zeros(n, n);
        padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let (k, smin) =
        svd.singular_values
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |(bk, bs), (k, &s)| if s < bs { (k, s) } else { (bk, bs) },
            );
    (v_t.row(k).adjoint(), smin)
}

/// Inverse, with a descriptive error for singular input.
pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone().try_inverse().ok_or_else(|| {
        Error::NonInvertible(format!("{}x{} matrix is singular", m.nrows(), m.ncols()))
    })
}

/// Solve `m x = b`.
pub fn solve(m: &CMat, b: &CMat) -> Result<CMat> {
    m.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::NonInvertible("linear system is singular".into()))
}

/// Frobenius norm.
pub fn frob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Matrix exponential by scaling and squaring of a Taylor polynomial.
pub fn expm(m: &CMat) -> CMat {
    let n = m.nrows();
    let norm = frob(m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m * C64::new(0.5f64.powi(squarings), 0.0);
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..=18 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigenvalues_of_triangular_matrix() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 1.0), c(3.0, 0.0), c(0.0, 0.0), c(-2.0, 0.5)]);
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((ev[0] - c(-2.0, 0.5)).norm() < 1e-12);
        assert!((ev[1] - c(1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_rotation() {
        let m = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((ev[0] - c(0.0, -1.0)).norm() < 1e-12);
        assert!((ev[1] - c(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn null_vector_of_rank_one() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 1.0), c(2.0, 0.0), c(4.0, 2.0)]);
        let (v, s) = null_vector(&m);
        assert!(s < 1e-12);
        assert!((&m * &v).norm() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wide_null_vector() {
        let m = CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(1.0, 0.0)]);
        let (v, _) = null_vector(&m);
        assert!((&m * &v).norm() < 1e-12);
    }

    #[test]
    fn exponential_of_rotation_generator() {
        let m = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-3.0, 0.0), c(3.0, 0.0), c(0.0, 0.0)]);
        let e = expm(&m);
        assert!((e[(0, 0)] - c(3.0f64.cos(), 0.0)).norm() < 1e-13);
        assert!((e[(1, 0)] - c(3.0f64.sin(), 0.0)).norm() < 1e-13);
    }
}
