//! Supersymmetric Schlesinger equations, their theta-expansion and strict
//! special solutions.

use super::operator::{pole_fraction, v_matrix};
use super::potential::{SuperChart, SuperCoordinates};
use super::{
    c64, commutator, lift_matrix, mat_add, mat_max_at_point, mat_mul, mat_scale, mat_sub,
    SuperMatrix,
};
use crate::grassmann::{Parity, SuperJet};
use crate::linalg::{self, CMat, CVec};
use crate::schlesinger::{
    check_solution, schlesinger_rhs, CheckOptions, PoleSign, SchlesingerSystem, SolutionReport,
};
use crate::{Error, Result, C64};
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

type FieldFn = dyn Fn(&SuperCoordinates) -> Result<Vec<SuperMatrix>> + Send + Sync;

/// Even matrix-valued functions `A_1, .., A_n` of `(u, theta)`.
#[derive(Clone)]
pub struct SuperResidueField {
    n: usize,
    dim: usize,
    constants: usize,
    f: Arc<FieldFn>,
}

impl fmt::Debug for SuperResidueField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SuperResidueField")
            .field("n", &self.n)
            .field("dim", &self.dim)
            .finish()
    }
}

impl SuperResidueField {
    pub fn new<F>(n: usize, dim: usize, f: F) -> Self
    where
        F: Fn(&SuperCoordinates) -> Result<Vec<SuperMatrix>> + Send + Sync + 'static,
    {
        SuperResidueField {
            n,
            dim,
            constants: 0,
            f: Arc::new(f),
        }
    }

    /// Constant, theta-independent residues.
    pub fn constant(residues: Vec<CMat>) -> Self {
        let n = residues.len();
        let dim = residues.first().map_or(0, |a| a.nrows());
        Self::new(n, dim, move |c: &SuperCoordinates| {
            Ok(residues
                .iter()
                .map(|a| lift_matrix(a, c.generators, &c.layout))
                .collect())
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coordinates and residues expanded at `u`.
    pub fn expand(&self, u: &[C64], order: usize) -> Result<(SuperCoordinates, Vec<SuperMatrix>)> {
        if u.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "point has {} coordinates, expected {}",
                u.len(),
                self.n
            )));
        }
        for i in 0..self.n {
            for j in i + 1..self.n {
                let distance = (u[i] - u[j]).norm();
                if distance < 1e-12 * (1.0 + u[i].norm()) {
                    return Err(Error::PoleProximity { i, j, distance });
                }
            }
        }
        let coords = SuperCoordinates::new(self.n, self.constants, u, order);
        let a = (self.f)(&coords)?;
        if a.len() != self.n
            || a.iter()
                .any(|m| m.len() != self.dim || m.iter().any(|r| r.len() != self.dim))
        {
            return Err(Error::InvalidData(
                "residue field returned matrices of the wrong shape".into(),
            ));
        }
        for m in &a {
            for x in m.iter().flatten() {
                if !x.is_zero() && x.parity() != Some(Parity::Even) {
                    return Err(Error::Parity("residue matrices must be even".into()));
                }
            }
        }
        Ok((coords, a))
    }
}

/// Residuals of the odd-frame equations and of the differential form.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperSchlesingerReport {
    /// `e_m A_n + f_mn [A_m, A_n]` for `m != n`.
    pub cross: f64,
    /// `e_m A_m - sum_n f_mn [A_m, A_n]`.
    pub diagonal: f64,
    /// All components of `dA_m = sum_n dlog(u^m - u^n - theta^m theta^n) [A_m, A_n]`.
    pub differential: f64,
}

impl SuperSchlesingerReport {
    pub fn max_residual(&self) -> f64 {
        self.cross.max(self.diagonal).max(self.differential)
    }
}

fn map_entries(m: &SuperMatrix, f: impl Fn(&SuperJet) -> Result<SuperJet>) -> Result<SuperMatrix> {
    m.iter()
        .map(|r| r.iter().map(&f).collect::<Result<Vec<_>>>())
        .collect()
}

/// `u^m - u^n - theta^m theta^n`.
fn pole_distance(c: &SuperCoordinates, m: usize, n: usize) -> SuperJet {
    &(&c.u[m] - &c.u[n]) - &(&c.theta[m] * &c.theta[n])
}

/// Residuals of the odd-frame equations for residues `a` in a frame with connection matrices `g`.
fn frame_residuals(
    c: &SuperCoordinates,
    a: &[SuperMatrix],
    g: Option<&[SuperMatrix]>,
) -> Result<(Vec<SuperMatrix>, Vec<SuperMatrix>)> {
    let n = a.len();
    let mut cross = Vec::new();
    let mut diagonal = Vec::new();
    for m in 0..n {
        let mut diag_rhs: Option<SuperMatrix> = None;
        for k in 0..n {
            let mut lhs = map_entries(&a[k], |x| x.susy_derivative(m))?;
            if let Some(g) = g {
                lhs = mat_add(&lhs, &commutator(&g[m], &a[k]));
            }
            if k == m {
                diagonal.push(lhs);
                continue;
            }
            let term = mat_scale(
                &commutator(&a[m], &a[k]),
                &pole_fraction(&c.theta, &c.u, m, k)?,
            );
            cross.push(mat_add(&lhs, &term));
            diag_rhs = Some(match diag_rhs {
                None => term,
                Some(acc) => mat_add(&acc, &term),
            });
        }
        if let Some(rhs) = diag_rhs {
            let last = diagonal.pop().expect("pushed above");
            diagonal.push(mat_sub(&last, &rhs));
        }
    }
    Ok((cross, diagonal))
}

/// `du^k` components of the differential form residual, `[m][k]`.
fn du_residuals(c: &SuperCoordinates, a: &[SuperMatrix]) -> Result<Vec<Vec<SuperMatrix>>> {
    let n = a.len();
    let mut out = Vec::with_capacity(n);
    for m in 0..n {
        let mut row = Vec::with_capacity(n);
        for k in 0..n {
            let mut r = map_entries(&a[m], |x| x.even_derivative(k))?;
            for j in 0..n {
                if j == m || (k != m && k != j) {
                    continue;
                }
                let sign = if k == m { 1.0 } else { -1.0 };
                let inv = pole_distance(c, m, j).inverse()?.scale(c64(sign));
                r = mat_sub(&r, &mat_scale(&commutator(&a[m], &a[j]), &inv));
            }
            row.push(r);
        }
        out.push(row);
    }
    Ok(out)
}

/// `dtheta^k` components of the differential form residual.
fn dtheta_residuals(c: &SuperCoordinates, a: &[SuperMatrix]) -> Result<Vec<SuperMatrix>> {
    let n = a.len();
    let mut out = Vec::new();
    for m in 0..n {
        for k in 0..n {
            let mut r = map_entries(&a[m], |x| Ok(x.left_derivative(k)))?;
            for j in 0..n {
                if j == m {
                    continue;
                }
                let l = pole_distance(c, m, j);
                let dl = l.left_derivative(k);
                if dl.is_zero() {
                    continue;
                }
                r = mat_sub(
                    &r,
                    &mat_scale(&commutator(&a[m], &a[j]), &(&dl * &l.inverse()?)),
                );
            }
            out.push(r);
        }
    }
    Ok(out)
}

fn worst(ms: &[SuperMatrix]) -> f64 {
    ms.iter().map(mat_max_at_point).fold(0.0, f64::max)
}

/// Evaluates the supersymmetric Schlesinger equations at `u`.
pub fn super_schlesinger_residual(
    field: &SuperResidueField,
    u: &[C64],
    order: usize,
) -> Result<SuperSchlesingerReport> {
    let (c, a) = field.expand(u, order.max(1))?;
    let (cross, diagonal) = frame_residuals(&c, &a, None)?;
    let du: Vec<SuperMatrix> = du_residuals(&c, &a)?.into_iter().flatten().collect();
    let dtheta = dtheta_residuals(&c, &a)?;
    Ok(SuperSchlesingerReport {
        cross: worst(&cross),
        diagonal: worst(&diagonal),
        differential: worst(&du).max(worst(&dtheta)),
    })
}

/// Comparison of the theta-free part of the flow with the classical equations.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyReduction {
    /// Largest theta-free coefficient of the `du` residuals.
    pub super_residual: f64,
    /// Largest classical residual `dA - rhs` for the body of `A`.
    pub classical_residual: f64,
    /// Largest entrywise difference between the two.
    pub difference: f64,
}

fn body_matrix(m: &SuperMatrix) -> CMat {
    let d = m.len();
    CMat::from_fn(d, d, |i, j| m[i][j].body().value())
}

/// The theta-free part of the `du` components against the classical residual
/// of the body, with the classical flow in the [`PoleSign::Plus`] convention.
pub fn body_reduction(field: &SuperResidueField, u: &[C64], order: usize) -> Result<BodyReduction> {
    let (c, a) = field.expand(u, order.max(1))?;
    let n = field.n();
    let du = du_residuals(&c, &a)?;
    let bodies: Vec<CMat> = a.iter().map(body_matrix).collect();
    let mut system = SchlesingerSystem::new(u.to_vec(), bodies, linalg::identity(field.dim()))?;
    system.sign = PoleSign::Plus;
    let mut report = BodyReduction {
        super_residual: 0.0,
        classical_residual: 0.0,
        difference: 0.0,
    };
    for k in 0..n {
        let mut direction = vec![c64(0.0); n];
        direction[k] = c64(1.0);
        let rhs = schlesinger_rhs(&system, &direction)?;
        for m in 0..n {
            let derivative = body_matrix(&map_entries(&a[m], |x| x.even_derivative(k))?);
            let classical = derivative - &rhs[m];
            let sup = body_matrix(&du[m][k]);
            report.super_residual = report.super_residual.max(linalg::max_abs(&sup));
            report.classical_residual = report.classical_residual.max(linalg::max_abs(&classical));
            report.difference = report.difference.max(linalg::max_abs(&(sup - classical)));
        }
    }
    Ok(report)
}

/// The `du` residuals split by theta-degree.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyReport {
    /// Level `l` collects the coefficients of degree `2l`; level 0 is the classical system.
    pub levels: usize,
    pub level_residuals: Vec<f64>,
    /// `components[m]`: nonzero theta-coefficients `(mask, matrix)` of `A_m` at the point.
    pub components: Vec<Vec<(u32, CMat)>>,
}

impl HierarchyReport {
    pub fn max_residual(&self) -> f64 {
        self.level_residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Decomposes the flow by theta-monomials (at most four odd coordinates).
pub fn expand_theta_components(
    field: &SuperResidueField,
    u: &[C64],
    order: usize,
) -> Result<HierarchyReport> {
    let n = field.n();
    if n > 4 {
        return Err(Error::InvalidParameter(format!(
            "theta expansion supports n <= 4, got {n}"
        )));
    }
    let (c, a) = field.expand(u, order.max(1))?;
    let levels = n / 2 + 1;
    let mut level_residuals = vec![0.0f64; levels];
    for row in du_residuals(&c, &a)? {
        for r in row {
            for x in r.iter().flatten() {
                for (mask, coeff) in x.terms() {
                    let level = mask.count_ones() as usize / 2;
                    if level < levels {
                        level_residuals[level] = level_residuals[level].max(coeff.value().norm());
                    }
                }
            }
        }
    }
    let d = field.dim();
    let components = a
        .iter()
        .map(|m| {
            let mut masks: Vec<u32> = m
                .iter()
                .flatten()
                .flat_map(|x| x.terms().map(|(k, _)| k))
                .collect();
            masks.sort_unstable();
            masks.dedup();
            masks
                .into_iter()
                .map(|mask| {
                    (
                        mask,
                        CMat::from_fn(d, d, |i, j| m[i][j].coefficient(mask).value()),
                    )
                })
                .filter(|(_, mat)| linalg::max_abs(mat) > 0.0)
                .collect()
        })
        .collect();
    Ok(HierarchyReport {
        levels,
        level_residuals,
        components,
    })
}

/// Dependence of a residual on the shift `kappa`: `R(kappa) = constant + kappa linear + kappa^2 quadratic`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KappaReport {
    pub constant: f64,
    pub linear: f64,
    pub quadratic: f64,
}

fn kappa_split<F>(mut residual: F) -> Result<KappaReport>
where
    F: FnMut(C64) -> Result<Vec<SuperMatrix>>,
{
    let r0 = residual(c64(0.0))?;
    let r1 = residual(c64(1.0))?;
    let r2 = residual(c64(2.0))?;
    let mut report = KappaReport {
        constant: worst(&r0),
        linear: 0.0,
        quadratic: 0.0,
    };
    for ((a, b), c) in r0.iter().zip(&r1).zip(&r2) {
        let quadratic = mat_scale(&mat_add(&mat_sub(c, &mat_scale(b, &two(a))), a), &half(a));
        let linear = mat_sub(&mat_sub(b, a), &quadratic);
        report.linear = report.linear.max(mat_max_at_point(&linear));
        report.quadratic = report.quadratic.max(mat_max_at_point(&quadratic));
    }
    Ok(report)
}

fn scalar_like(m: &SuperMatrix, v: f64) -> SuperJet {
    let x = &m[0][0];
    SuperJet::constant_jet(x.generators(), x.proto().layout(), c64(v))
}

fn two(m: &SuperMatrix) -> SuperJet {
    scalar_like(m, 2.0)
}

fn half(m: &SuperMatrix) -> SuperJet {
    scalar_like(m, 0.5)
}

/// Residues `A_m = -(V + kappa) P_m` in the moving frame of a Frobenius chart.
fn frame_residues(chart: &SuperChart, v: &SuperMatrix, kappa: C64) -> Vec<SuperMatrix> {
    let n = chart.n;
    (0..n)
        .map(|m| {
            let mut a = vec![vec![chart.zero(); n]; n];
            for b in 0..n {
                a[b][m] = -&v[b][m];
            }
            a[m][m] = &a[m][m] - &chart.coords.constant(kappa);
            a
        })
        .collect()
}

/// The `kappa`-expansion of the frame equations with the `nabla~` connection
/// for the residues `-(V + kappa) P_m` built from a Frobenius chart.
pub fn kappa_linearity_frame(chart: &SuperChart, charge: C64) -> Result<KappaReport> {
    let v = v_matrix(chart, charge)?;
    let g = chart.tnabla_matrices();
    kappa_split(|kappa| {
        let a = frame_residues(chart, &v, kappa);
        let (mut cross, diagonal) = frame_residuals(&chart.coords, &a, Some(&g))?;
        cross.extend(diagonal);
        Ok(cross)
    })
}

type ProjectorFn = dyn Fn(&SuperCoordinates) -> Result<Vec<SuperMatrix>> + Send + Sync;

/// Strict special data: `A_m = -(V + kappa) P_m` with `h`-orthogonal rank-one projectors.
#[derive(Clone)]
pub struct StrictSpecialSystem {
    pub n: usize,
    /// Matrix of the form `h` on `T` (symmetric in components since `T` is odd).
    pub h: CMat,
    pub v: CMat,
    pub kappa: C64,
    pub epsilon: CVec,
    pub charge: C64,
    projectors: Arc<ProjectorFn>,
}

impl fmt::Debug for StrictSpecialSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StrictSpecialSystem")
            .field("n", &self.n)
            .field("h", &self.h)
            .field("v", &self.v)
            .field("kappa", &self.kappa)
            .field("epsilon", &self.epsilon)
            .field("charge", &self.charge)
            .finish()
    }
}

impl StrictSpecialSystem {
    pub fn new<F>(
        h: CMat,
        v: CMat,
        kappa: C64,
        epsilon: CVec,
        charge: C64,
        projectors: F,
    ) -> Result<Self>
    where
        F: Fn(&SuperCoordinates) -> Result<Vec<SuperMatrix>> + Send + Sync + 'static,
    {
        let n = h.nrows();
        if h.ncols() != n || v.nrows() != n || v.ncols() != n || epsilon.len() != n {
            return Err(Error::InvalidData(
                "h, V and eps must share the dimension of T".into(),
            ));
        }
        Ok(StrictSpecialSystem {
            n,
            h,
            v,
            kappa,
            epsilon,
            charge,
            projectors: Arc::new(projectors),
        })
    }

    /// The same projectors with another shift.
    pub fn with_kappa(&self, kappa: C64) -> Self {
        StrictSpecialSystem {
            kappa,
            ..self.clone()
        }
    }

    pub fn projectors_at(&self, c: &SuperCoordinates) -> Result<Vec<SuperMatrix>> {
        let p = (self.projectors)(c)?;
        if p.len() != self.n {
            return Err(Error::InvalidData(format!(
                "{} projectors for n = {}",
                p.len(),
                self.n
            )));
        }
        Ok(p)
    }

    fn shifted(&self, c: &SuperCoordinates) -> SuperMatrix {
        lift_matrix(
            &(&self.v + linalg::identity(self.n) * self.kappa),
            c.generators,
            &c.layout,
        )
    }

    /// `A_m = -(V + kappa) P_m`.
    pub fn residue_field(&self) -> SuperResidueField {
        let sys = self.clone();
        SuperResidueField::new(self.n, self.n, move |c: &SuperCoordinates| {
            let shifted = sys.shifted(c);
            let minus = c.constant(c64(-1.0));
            Ok(sys
                .projectors_at(c)?
                .iter()
                .map(|p| mat_scale(&mat_mul(&shifted, p), &minus))
                .collect())
        })
    }
}

/// Verification of strict special data and of the Frobenius structure it induces.
#[derive(Clone, Debug)]
pub struct StrictSpecialReport {
    /// Projector algebra: idempotence, orthogonality, completeness, `h`-orthogonality of images.
    pub projector_algebra: f64,
    /// `sum_m A_m + V + kappa`.
    pub conservation: f64,
    /// `H V + V^T H`.
    pub v_skew: f64,
    /// `V eps - (3 - 2D)/4 eps`.
    pub epsilon_eigen: f64,
    /// Smallest body of `|P_m eps|` over the samples.
    pub frame_min: f64,
    pub schlesinger: SuperSchlesingerReport,
    /// `h(eps, A_m eps) - (3 - 2D - 4 kappa)/4 eta_m`.
    pub eta_relation: f64,
    /// Closedness of `sum dtheta (eta_m - theta^m eta'_m) + du eta'_m` with `eta'_m = e_m eta_m`.
    pub closedness: f64,
    /// `E eta_m - (D - 3/2) eta_m`.
    pub euler: f64,
    /// `(theta^m - theta^k) e_m eta_k`.
    pub cross_vanishing: f64,
    /// `sum_k d/dtheta^k eta_m - e_m eta_m`.
    pub odd_identity: f64,
    /// `sum_m eta_m` drift along the odd frame.
    pub eps_flatness: f64,
    pub kappa: KappaReport,
    /// Classical check of the theta-free slice at `kappa = 1/2` on the first sample.
    pub classical: Option<SolutionReport>,
    /// `identity_weight - (D + 1/2)` from the classical check.
    pub weight_offset: Option<f64>,
}

impl StrictSpecialReport {
    /// Pointwise algebraic conditions.
    pub fn algebraic_residual(&self) -> f64 {
        self.projector_algebra
            .max(self.conservation)
            .max(self.v_skew)
            .max(self.epsilon_eigen)
            .max(self.eta_relation)
    }

    /// Differential conditions: the flow and the reconstructed Frobenius structure.
    pub fn differential_residual(&self) -> f64 {
        [
            self.schlesinger.max_residual(),
            self.closedness,
            self.euler,
            self.cross_vanishing,
            self.odd_identity,
            self.eps_flatness,
            self.kappa.linear,
            self.kappa.quadratic,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.algebraic_residual() <= tol
            && self.differential_residual() <= tol
            && self.frame_min > tol
            && self.classical.as_ref().is_none_or(|r| r.is_special)
            && self.weight_offset.is_none_or(|w| w.abs() <= tol.max(1e-8))
    }
}

fn apply(m: &SuperMatrix, x: &[SuperJet]) -> Vec<SuperJet> {
    m.iter()
        .map(|r| {
            r.iter()
                .zip(x)
                .fold(x[0].scale(c64(0.0)), |acc, (a, b)| &acc + &(a * b))
        })
        .collect()
}

fn pair(h: &CMat, c: &SuperCoordinates, x: &[SuperJet], y: &[SuperJet]) -> SuperJet {
    let mut acc = c.zero();
    for i in 0..x.len() {
        for j in 0..y.len() {
            if h[(i, j)] != c64(0.0) {
                acc = &acc + &(&x[i] * &y[j]).scale(h[(i, j)]);
            }
        }
    }
    acc
}

fn at(x: &SuperJet) -> f64 {
    x.at_point().max_abs()
}

/// Checks strict special data at each sample point. Violations are reported, not raised.
pub fn strict_special_super(
    sys: &StrictSpecialSystem,
    samples: &[Vec<C64>],
    order: usize,
) -> Result<StrictSpecialReport> {
    let n = sys.n;
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no sample points".into()));
    }
    let order = order.max(3);
    let skew = &sys.h * &sys.v + sys.v.transpose() * &sys.h;
    let eigen = (c64(3.0) - sys.charge * 2.0) / 4.0;
    let mut report = StrictSpecialReport {
        projector_algebra: 0.0,
        conservation: 0.0,
        v_skew: linalg::max_abs(&skew),
        epsilon_eigen: (&sys.v * &sys.epsilon - &sys.epsilon * eigen).norm(),
        frame_min: f64::INFINITY,
        schlesinger: SuperSchlesingerReport {
            cross: 0.0,
            diagonal: 0.0,
            differential: 0.0,
        },
        eta_relation: 0.0,
        closedness: 0.0,
        euler: 0.0,
        cross_vanishing: 0.0,
        odd_identity: 0.0,
        eps_flatness: 0.0,
        kappa: KappaReport {
            constant: 0.0,
            linear: 0.0,
            quadratic: 0.0,
        },
        classical: None,
        weight_offset: None,
    };
    let field = sys.residue_field();
    for (index, u) in samples.iter().enumerate() {
        let (c, a) = field.expand(u, order)?;
        let p = sys.projectors_at(&c)?;
        let h_lift = lift_matrix(&sys.h, c.generators, &c.layout);
        let identity = lift_matrix(&linalg::identity(n), c.generators, &c.layout);
        let mut sum = mat_sub(&identity, &identity);
        for m in 0..n {
            sum = mat_add(&sum, &p[m]);
            for k in 0..n {
                let prod = mat_mul(&p[m], &p[k]);
                let target = if m == k {
                    p[m].clone()
                } else {
                    mat_sub(&prod, &prod)
                };
                report.projector_algebra = report
                    .projector_algebra
                    .max(mat_max_at_point(&mat_sub(&prod, &target)));
                if m != k {
                    let pt: SuperMatrix = (0..n)
                        .map(|i| (0..n).map(|j| p[m][j][i].clone()).collect())
                        .collect();
                    let cross = mat_mul(&mat_mul(&pt, &h_lift), &p[k]);
                    report.projector_algebra =
                        report.projector_algebra.max(mat_max_at_point(&cross));
                }
            }
        }
        report.projector_algebra = report
            .projector_algebra
            .max(mat_max_at_point(&mat_sub(&sum, &identity)));
        let total = a
            .iter()
            .skip(1)
            .fold(a[0].clone(), |acc, x| mat_add(&acc, x));
        report.conservation = report
            .conservation
            .max(mat_max_at_point(&mat_add(&total, &sys.shifted(&c))));

        let eps: Vec<SuperJet> = sys.epsilon.iter().map(|&x| c.constant(x)).collect();
        let frames: Vec<Vec<SuperJet>> = p.iter().map(|pm| apply(pm, &eps)).collect();
        for f in &frames {
            let body = f
                .iter()
                .map(|x| x.body().value().norm_sqr())
                .sum::<f64>()
                .sqrt();
            report.frame_min = report.frame_min.min(body);
        }
        let eta: Vec<SuperJet> = frames.iter().map(|f| pair(&sys.h, &c, &eps, f)).collect();
        let scale = c.constant((c64(3.0) - sys.charge * 2.0 - sys.kappa * 4.0) / 4.0);
        for m in 0..n {
            let lhs = pair(&sys.h, &c, &eps, &apply(&a[m], &eps));
            report.eta_relation = report.eta_relation.max(at(&(&lhs - &(&scale * &eta[m]))));
        }
        let eta_odd: Vec<SuperJet> = (0..n)
            .map(|m| eta[m].susy_derivative(m))
            .collect::<Result<_>>()?;
        let eta_sum = eta.iter().fold(c.zero(), |acc, x| &acc + x);
        for m in 0..n {
            report.eps_flatness = report.eps_flatness.max(at(&eta_sum.susy_derivative(m)?));
            let mut odd = c.zero();
            for k in 0..n {
                odd = &odd + &eta[m].left_derivative(k);
                let mut sym = &eta[k].susy_derivative(m)? + &eta[m].susy_derivative(k)?;
                if m == k {
                    sym = &sym - &eta_odd[m].scale(c64(2.0));
                } else {
                    let diff = &c.theta[m] - &c.theta[k];
                    report.cross_vanishing = report
                        .cross_vanishing
                        .max(at(&(&diff * &eta[k].susy_derivative(m)?)));
                }
                let mixed = &eta_odd[k].susy_derivative(m)? - &eta[m].even_derivative(k)?;
                let even = &eta_odd[k].even_derivative(m)? - &eta_odd[m].even_derivative(k)?;
                report.closedness = report
                    .closedness
                    .max(at(&sym))
                    .max(at(&mixed))
                    .max(at(&even));
            }
            report.odd_identity = report.odd_identity.max(at(&(&odd - &eta_odd[m])));
            let mut euler = &eta[m].scale(-(sys.charge - 1.5)) + &c.zero();
            for k in 0..n {
                euler = &euler + &(&c.u[k] * &eta[m].even_derivative(k)?);
                euler = &euler + &(&c.theta[k] * &eta[m].susy_derivative(k)?).scale(c64(0.5));
            }
            report.euler = report.euler.max(at(&euler));
        }

        let s = super_schlesinger_residual(&field, u, order)?;
        report.schlesinger.cross = report.schlesinger.cross.max(s.cross);
        report.schlesinger.diagonal = report.schlesinger.diagonal.max(s.diagonal);
        report.schlesinger.differential = report.schlesinger.differential.max(s.differential);

        let k = kappa_split(|kappa| {
            let (c, a) = sys.with_kappa(kappa).residue_field().expand(u, order)?;
            let (mut cross, diagonal) = frame_residuals(&c, &a, None)?;
            cross.extend(diagonal);
            Ok(cross)
        })?;
        report.kappa.constant = report.kappa.constant.max(k.constant);
        report.kappa.linear = report.kappa.linear.max(k.linear);
        report.kappa.quadratic = report.kappa.quadratic.max(k.quadratic);

        if index == 0 {
            let half = sys.with_kappa(c64(0.5));
            let (_, slice) = half.residue_field().expand(u, order)?;
            let bodies: Vec<CMat> = slice.iter().map(body_matrix).collect();
            let mut classical = SchlesingerSystem::new(u.clone(), bodies, sys.h.clone())?;
            classical.sign = PoleSign::Plus;
            classical.identity = Some(sys.epsilon.clone());
            let check = check_solution(&classical, &CheckOptions::default());
            report.weight_offset = check.identity_weight.map(|w| w - (sys.charge.re + 0.5));
            report.classical = Some(check);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::super_frobenius::fixtures;
    use crate::super_frobenius::{egoroff_chart, ChartOptions};

    fn mat(rows: &[&[f64]]) -> CMat {
        CMat::from_fn(rows.len(), rows.len(), |i, j| c64(rows[i][j]))
    }

    #[test]
    fn commuting_constant_residues() {
        let a = vec![
            mat(&[&[1.0, 0.0], &[0.0, 2.0]]),
            mat(&[&[-3.0, 0.0], &[0.0, 0.5]]),
            mat(&[&[0.0, 0.0], &[0.0, 1.0]]),
        ];
        let field = SuperResidueField::constant(a);
        let u = [c64(0.0), c64(1.0), c64(-2.0)];
        assert_eq!(
            super_schlesinger_residual(&field, &u, 2)
                .unwrap()
                .max_residual(),
            0.0
        );
        let h = expand_theta_components(&field, &u, 2).unwrap();
        assert_eq!(h.levels, 2);
        assert_eq!(h.max_residual(), 0.0);
        assert!(h
            .components
            .iter()
            .all(|c| c.iter().all(|(mask, _)| *mask == 0)));
    }

    #[test]
    fn body_reduction_matches_classical_residual() {
        // theta-free, non-solving field: both residuals are nonzero and agree.
        let field = SuperResidueField::new(3, 2, |c: &SuperCoordinates| {
            let one = c.constant(c64(1.0));
            let mk = |a: &SuperJet, b: &SuperJet| {
                vec![vec![a.clone(), b.clone()], vec![b.clone(), &one - a]]
            };
            Ok(vec![
                mk(&(&c.u[0] * &c.u[1]), &one),
                mk(&c.u[2], &(&c.u[0] * &c.u[0])),
                mk(&one.scale(c64(0.3)), &c.u[1]),
            ])
        });
        let u = [c64(0.2), c64(1.1), c64(-0.7)];
        let r = body_reduction(&field, &u, 2).unwrap();
        assert!(r.classical_residual > 0.1);
        assert!(r.difference < 1e-13, "{r:?}");
    }

    #[test]
    fn odd_components_are_rejected() {
        let field = SuperResidueField::new(2, 1, |c: &SuperCoordinates| {
            Ok(vec![
                vec![vec![c.theta[0].clone()]],
                vec![vec![c.constant(c64(1.0))]],
            ])
        });
        let err = expand_theta_components(&field, &[c64(0.0), c64(1.0)], 2).unwrap_err();
        assert!(matches!(err, Error::Parity(_)));
        let field = SuperResidueField::constant(vec![mat(&[&[1.0]]); 5]);
        let u: Vec<C64> = (0..5).map(|k| c64(k as f64)).collect();
        assert!(expand_theta_components(&field, &u, 1).is_err());
        let coincident = SuperResidueField::constant(vec![mat(&[&[1.0]]); 2]);
        assert!(matches!(
            super_schlesinger_residual(&coincident, &[c64(1.0), c64(1.0)], 1),
            Err(Error::PoleProximity { .. })
        ));
    }

    #[test]
    fn lifted_two_pole_system_is_strict_special() {
        for kappa in [0.0, 0.5, -1.3] {
            let sys = fixtures::lifted_two_pole(0.35, 1.0, c64(kappa)).unwrap();
            let samples = vec![vec![c64(1.0), c64(-0.2)], vec![c64(0.4), c64(-1.1)]];
            let r = strict_special_super(&sys, &samples, 4).unwrap();
            assert!(r.algebraic_residual() < 1e-10, "{r:?}");
            assert!(r.differential_residual() < 1e-10, "{r:?}");
            assert!(r.frame_min > 0.1);
            let classical = r.classical.as_ref().unwrap();
            assert!(classical.is_special, "{classical:?}");
            assert!(r.weight_offset.unwrap().abs() < 1e-8, "{r:?}");
            assert!(r.passed(1e-9));
            let h = expand_theta_components(&sys.residue_field(), &samples[0], 3).unwrap();
            assert_eq!(h.levels, 2);
            assert!(h.max_residual() < 1e-10);
            assert!(h.components[0].iter().any(|(mask, _)| *mask == 0b11));
        }
    }

    #[test]
    fn pointwise_construction_passes_algebraic_checks_only() {
        let sys = fixtures::pointwise_strict_special(3, 0.4, c64(0.25), 17).unwrap();
        let r = strict_special_super(&sys, &[vec![c64(0.0), c64(1.0), c64(2.5)]], 3).unwrap();
        assert!(r.algebraic_residual() < 1e-12, "{r:?}");
        assert!(r.schlesinger.max_residual() > 1e-3);
    }

    #[test]
    fn frame_kappa_terms_cancel_on_frobenius_charts() {
        for charge in [0.0, 1.2] {
            let psi = fixtures::two_point_potential(c64(0.8), charge, [c64(0.0), c64(0.0)]);
            let chart =
                egoroff_chart(&psi, &[c64(0.3), c64(-0.9)], &ChartOptions::default()).unwrap();
            let k = kappa_linearity_frame(&chart, c64(charge)).unwrap();
            assert!(
                k.linear < 1e-10 && k.quadratic < 1e-10 && k.constant < 1e-10,
                "{k:?}"
            );
        }
    }

    #[test]
    fn frame_kappa_terms_cancel_without_flatness() {
        // The linear terms cancel given only the cross relation, which random data violate.
        let mut rng = fixtures::rng(4);
        let (psi, u) = fixtures::random_odd_potential(2, &mut rng);
        let chart = egoroff_chart(&psi, &u, &ChartOptions::default()).unwrap();
        let k = kappa_linearity_frame(&chart, c64(0.5)).unwrap();
        assert!(k.quadratic < 1e-10);
        assert!(k.constant > 1e-6);
    }
}
