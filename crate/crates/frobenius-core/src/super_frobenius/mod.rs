//! Semisimple Frobenius supermanifolds in canonical coordinates `(u, theta)`
//! and supersymmetric Schlesinger systems.
//!
//! Functions of `(u, theta)` are [`SuperJet`]s: Grassmann polynomials in the
//! odd coordinates whose coefficients are Taylor jets in the even ones. The
//! first `n` generators are the odd coordinates; further generators, when
//! present, are odd constants and are never differentiated.
//!
//! Tangent vectors are stored in the basis `(e_1, ..., e_n, d_1, ..., d_n)`
//! where `e_a = d/dtheta^a + theta^a d/du^a` are odd and `d_a = d/du^a` are
//! even; on the algebra `T = T_1 + T_0` the even half is `e_a = Pi(e_a)`.
//! Coefficients stand to the left of basis vectors.

mod ns;
mod operator;
mod potential;
mod schlesinger;
mod tangent;

pub mod fixtures;

pub use ns::{ns_representation_check, NsReport, PolyField, Polynomial};
pub use operator::{super_v_operator, SuperOperatorReport};
pub use potential::{
    egoroff_chart, super_residuals, ChartOptions, CoefficientFn, SuperChart, SuperCoordinates,
    SuperEquation, SuperPotential, SuperResiduals,
};
pub use schlesinger::{
    body_reduction, expand_theta_components, kappa_linearity_frame, strict_special_super,
    super_schlesinger_residual, BodyReduction, HierarchyReport, KappaReport, StrictSpecialReport,
    StrictSpecialSystem, SuperResidueField, SuperSchlesingerReport,
};
pub use tangent::{
    basis_vector, is_odd_slot, multiply, odd_involution, tnabla_and_metrics, BilinearForm, Product,
    TangentVector, TnablaReport,
};

use crate::grassmann::{Coefficient, Grassmann, SuperJet};
use crate::jet::Jet;
use crate::C64;
use alloc::vec::Vec;

/// Square matrix with Grassmann entries, indexed `[row][column]`.
pub type SuperMatrix<T = Jet> = Vec<Vec<Grassmann<T>>>;

pub(crate) fn mat_mul<T: Coefficient>(a: &SuperMatrix<T>, b: &SuperMatrix<T>) -> SuperMatrix<T> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n).fold(
                        Grassmann::zero(a[i][j].generators(), a[i][j].proto()),
                        |acc, k| &acc + &(&a[i][k] * &b[k][j]),
                    )
                })
                .collect()
        })
        .collect()
}

pub(crate) fn mat_add<T: Coefficient>(a: &SuperMatrix<T>, b: &SuperMatrix<T>) -> SuperMatrix<T> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
        .collect()
}

pub(crate) fn mat_sub<T: Coefficient>(a: &SuperMatrix<T>, b: &SuperMatrix<T>) -> SuperMatrix<T> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
        .collect()
}

pub(crate) fn mat_scale<T: Coefficient>(a: &SuperMatrix<T>, s: &Grassmann<T>) -> SuperMatrix<T> {
    a.iter()
        .map(|r| r.iter().map(|x| s * x).collect())
        .collect()
}

pub(crate) fn commutator<T: Coefficient>(a: &SuperMatrix<T>, b: &SuperMatrix<T>) -> SuperMatrix<T> {
    mat_sub(&mat_mul(a, b), &mat_mul(b, a))
}

/// Largest coefficient of the entries at the expansion point.
pub(crate) fn mat_max_at_point(a: &SuperMatrix<Jet>) -> f64 {
    a.iter()
        .flatten()
        .fold(0.0, |acc, x| acc.max(x.at_point().max_abs()))
}

/// Constant complex matrix lifted to a super matrix.
pub(crate) fn lift_matrix(
    m: &crate::linalg::CMat,
    generators: usize,
    layout: &alloc::sync::Arc<crate::jet::JetLayout>,
) -> SuperMatrix<Jet> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| SuperJet::constant_jet(generators, layout, m[(i, j)]))
                .collect()
        })
        .collect()
}

pub(crate) fn c64(re: f64) -> C64 {
    C64::new(re, 0.0)
}
