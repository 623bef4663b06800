//! Pointwise engine for (pre-)Frobenius manifolds given in flat coordinates.
//!
//! Conventions: `lowered[a][b][c] = g(d_a o d_b, d_c)` (third derivatives of
//! the potential for potential models), `structure[a][b][c] = A_ab^c`, and the
//! multiplication operator `L_a` acts on column vectors with
//! `(L_a)[c][b] = A_ab^c`. Connections are written `nabla_a = d_a + Omega_a`
//! in the flat frame, with curvature `d_a Omega_b - d_b Omega_a + [Omega_a, Omega_b]`.

use crate::gw_recursion::TruncatedPotential;
use crate::linalg::{self, CMat, CVec};
use crate::numeric::{central_richardson, default_step};
use crate::{Error, Result, C64};
use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense rank-3 tensor with index order `(a, b, c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<C64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![C64::new(0.0, 0.0); n * n * n],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize, usize) -> C64) -> Self {
        let mut t = Self::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    t.set(a, b, c, f(a, b, c));
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> C64 {
        self.data[(a * self.n + b) * self.n + c]
    }

    pub fn set(&mut self, a: usize, b: usize, c: usize, v: C64) {
        self.data[(a * self.n + b) * self.n + c] = v;
    }

    pub fn values(&self) -> &[C64] {
        &self.data
    }

    /// Contracts the last index with a matrix: `out[a][b][c] = sum_e t[a][b][e] m[e][c]`.
    pub fn contract_last(&self, m: &CMat) -> Tensor3 {
        let n = self.n;
        Tensor3::from_fn(n, |a, b, c| {
            (0..n).map(|e| self.get(a, b, e) * m[(e, c)]).sum()
        })
    }

    pub fn max_abs(&self) -> f64 {
        crate::numeric::max_abs(&self.data)
    }
}

/// Euler vector field `E = Q x + shift` in flat coordinates, with its constants.
#[derive(Clone, Debug, PartialEq)]
pub struct EulerData {
    /// `Q[a][b] = d_b E^a` (constant for an affine field).
    pub linear: CMat,
    /// Constant part of `E`.
    pub shift: Vec<C64>,
    /// Scaling of the product: `Lie_E(o) = d0 o`.
    pub d0: f64,
    /// Conformal weight: `Lie_E(g) = D g`.
    pub charge: f64,
}

impl EulerData {
    pub fn vector_at(&self, x: &[C64]) -> CVec {
        let xv = CVec::from_column_slice(x);
        &self.linear * xv + CVec::from_column_slice(&self.shift)
    }

    /// `V = Q - (D/2) Id` on flat fields.
    pub fn v_flat(&self) -> CMat {
        let n = self.linear.nrows();
        &self.linear - linalg::identity(n) * C64::new(self.charge / 2.0, 0.0)
    }
}

/// A Frobenius-type structure given in flat coordinates.
pub trait FrobeniusModel {
    fn dim(&self) -> usize;

    /// Constant flat metric.
    fn metric(&self) -> CMat;

    /// `g(d_a o d_b, d_c)` at `x`.
    fn lowered_structure(&self, x: &[C64]) -> Result<Tensor3>;

    /// `d_d g(d_a o d_b, d_c)` for every direction `d`. Defaults to central
    /// differences with one Richardson step.
    fn lowered_structure_derivatives(&self, x: &[C64]) -> Result<Vec<Tensor3>> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n);
        for d in 0..n {
            let h = default_step(x[d]);
            let mut err = None;
            let values = central_richardson(
                |s| {
                    let mut y = x.to_vec();
                    y[d] += s;
                    match self.lowered_structure(&y) {
                        Ok(t) => t.data,
                        Err(e) => {
                            err = Some(e);
                            vec![C64::new(0.0, 0.0); n * n * n]
                        }
                    }
                },
                h,
            );
            if let Some(e) = err {
                return Err(e);
            }
            out.push(Tensor3 { n, data: values });
        }
        Ok(out)
    }

    fn euler(&self) -> Option<EulerData> {
        None
    }

    /// Index `a` such that `d_a` is the flat identity.
    fn identity_index(&self) -> Option<usize> {
        None
    }
}

/// Quantum cohomology of `P^r` from a truncated potential.
impl FrobeniusModel for TruncatedPotential {
    fn dim(&self) -> usize {
        self.r() as usize + 1
    }

    fn metric(&self) -> CMat {
        let n = self.dim();
        CMat::from_fn(n, n, |a, b| C64::new(self.metric_entry(a, b), 0.0))
    }

    fn lowered_structure(&self, x: &[C64]) -> Result<Tensor3> {
        let n = self.dim();
        let mut t = Tensor3::zeros(n);
        for a in 0..n {
            for b in a..n {
                for c in b..n {
                    let v = self.third_derivative(a, b, c, x)?.value;
                    for (p, q, s) in permutations3(a, b, c) {
                        t.set(p, q, s, v);
                    }
                }
            }
        }
        Ok(t)
    }

    fn lowered_structure_derivatives(&self, x: &[C64]) -> Result<Vec<Tensor3>> {
        let n = self.dim();
        let mut out = vec![Tensor3::zeros(n); n];
        for d in 0..n {
            for a in 0..n {
                for b in a..n {
                    for c in b..n {
                        let v = self.derivative(&[d, a, b, c], x)?.value;
                        for (p, q, s) in permutations3(a, b, c) {
                            out[d].set(p, q, s, v);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `E = sum_a (1 - a) x_a d_a + (r + 1) d_1`, `d0 = 1`, `D = 2 - r`.
    fn euler(&self) -> Option<EulerData> {
        let n = self.dim();
        let r = self.r() as f64;
        let linear = CMat::from_fn(n, n, |a, b| {
            if a == b {
                C64::new(1.0 - a as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let mut shift = vec![C64::new(0.0, 0.0); n];
        shift[1] = C64::new(r + 1.0, 0.0);
        Some(EulerData {
            linear,
            shift,
            d0: 1.0,
            charge: 2.0 - r,
        })
    }

    fn identity_index(&self) -> Option<usize> {
        Some(0)
    }
}

fn permutations3(a: usize, b: usize, c: usize) -> [(usize, usize, usize); 6] {
    [
        (a, b, c),
        (a, c, b),
        (b, a, c),
        (b, c, a),
        (c, a, b),
        (c, b, a),
    ]
}

/// All pointwise data of a Frobenius structure at one point.
#[derive(Clone, Debug)]
pub struct FrobeniusPoint {
    pub x: Vec<C64>,
    pub metric: CMat,
    pub metric_inv: CMat,
    pub lowered: Tensor3,
    /// `A_ab^c`.
    pub structure: Tensor3,
    /// `d_d g(d_a o d_b, d_c)` per direction `d`.
    pub lowered_derivatives: Vec<Tensor3>,
    pub euler: Option<EulerData>,
    pub identity: Option<usize>,
}

/// Evaluates the model at `x`.
pub fn build_point<M: FrobeniusModel + ?Sized>(model: &M, x: &[C64]) -> Result<FrobeniusPoint> {
    let n = model.dim();
    if x.len() != n {
        return Err(Error::InvalidParameter(format!(
            "point has {} coordinates, expected {n}",
            x.len()
        )));
    }
    let metric = model.metric();
    let asym = linalg::max_abs(&(&metric - metric.transpose()));
    if asym > 1e-12 * (1.0 + linalg::max_abs(&metric)) {
        return Err(Error::InvalidModel(format!(
            "metric is not symmetric ({asym:e})"
        )));
    }
    let metric_inv =
        linalg::inverse(&metric).map_err(|_| Error::InvalidModel("metric is singular".into()))?;
    let lowered = model.lowered_structure(x)?;
    let structure = lowered.contract_last(&metric_inv);
    let lowered_derivatives = model.lowered_structure_derivatives(x)?;
    Ok(FrobeniusPoint {
        x: x.to_vec(),
        metric,
        metric_inv,
        lowered,
        structure,
        lowered_derivatives,
        euler: model.euler(),
        identity: model.identity_index(),
    })
}

impl FrobeniusPoint {
    pub fn dim(&self) -> usize {
        self.metric.nrows()
    }

    /// `L_a` with `(L_a)[c][b] = A_ab^c`.
    pub fn mult_operator(&self, a: usize) -> CMat {
        let n = self.dim();
        CMat::from_fn(n, n, |c, b| self.structure.get(a, b, c))
    }

    /// Multiplication by the vector `v`.
    pub fn mult_by(&self, v: &CVec) -> CMat {
        let n = self.dim();
        let mut m = linalg::zeros(n);
        for a in 0..n {
            if v[a] != C64::new(0.0, 0.0) {
                m += self.mult_operator(a) * v[a];
            }
        }
        m
    }

    pub fn product(&self, x: &CVec, y: &CVec) -> CVec {
        self.mult_by(x) * y
    }

    pub fn inner(&self, x: &CVec, y: &CVec) -> C64 {
        (x.transpose() * &self.metric * y)[(0, 0)]
    }

    /// `d_d A_ab^c`.
    pub fn structure_derivative(&self, d: usize) -> Tensor3 {
        self.lowered_derivatives[d].contract_last(&self.metric_inv)
    }

    /// `d_d L_a`.
    pub fn mult_operator_derivative(&self, d: usize, a: usize) -> CMat {
        let n = self.dim();
        let t = self.structure_derivative(d);
        CMat::from_fn(n, n, |c, b| t.get(a, b, c))
    }

    /// `E o` in the flat frame.
    pub fn euler_operator(&self) -> Option<CMat> {
        let e = self.euler.as_ref()?;
        Some(self.mult_by(&e.vector_at(&self.x)))
    }

    /// Largest deviation of the lowered tensor from total symmetry.
    pub fn invariance_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let v = self.lowered.get(a, b, c);
                    for (p, q, s) in permutations3(a, b, c) {
                        worst = worst.max((v - self.lowered.get(p, q, s)).norm());
                    }
                }
            }
        }
        worst
    }

    /// `max |A_0a^b - delta_a^b|` when a flat identity is declared.
    pub fn identity_residual(&self) -> Option<f64> {
        let e = self.identity?;
        let n = self.dim();
        let l = self.mult_operator(e);
        Some(linalg::max_abs(&(l - linalg::identity(n))))
    }

    pub fn identity_vector(&self) -> Option<CVec> {
        let e = self.identity?;
        let mut v = CVec::zeros(self.dim());
        v[e] = C64::new(1.0, 0.0);
        Some(v)
    }
}

/// `max |sum_e (Phi_abe g^ef Phi_fcd - Phi_bce g^ef Phi_fad)|` over all indices.
pub fn associativity_residual(p: &FrobeniusPoint) -> f64 {
    let n = p.dim();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut s = C64::new(0.0, 0.0);
                    for f in 0..n {
                        s += p.structure.get(a, b, f) * p.lowered.get(f, c, d)
                            - p.structure.get(b, c, f) * p.lowered.get(f, a, d);
                    }
                    worst = worst.max(s.norm());
                }
            }
        }
    }
    worst
}

/// How to pick the operator whose eigenvectors are the idempotents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitOptions {
    /// Minimal relative gap between eigenvalues.
    pub tame_tol: f64,
    /// Seed for the random probe used without an Euler field.
    pub seed: u64,
    /// Random probes tried before giving up.
    pub retries: usize,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            tame_tol: 1e-6,
            seed: 0x5eed,
            retries: 8,
        }
    }
}

/// Canonical coordinates and the idempotent frame at a point.
#[derive(Clone, Debug)]
pub struct CanonicalChart {
    /// Eigenvalues of `E o` (canonical coordinates for `d0 = 1`), if an Euler field is known.
    pub u: Option<Vec<C64>>,
    /// Eigenvalues of the probe operator (equal to `u` when it exists).
    pub probe_values: Vec<C64>,
    /// Columns are the idempotents `e_i` in the flat basis.
    pub idempotents: CMat,
    /// `eta_i = g(e_i, e_i)`.
    pub eta: Vec<C64>,
    /// Chosen square roots of `eta_i`.
    pub sqrt_eta: Vec<C64>,
    /// `+1` for the principal root, `-1` for its negative.
    pub branches: Vec<i8>,
    /// Columns `f_i = e_i / sqrt(eta_i)`.
    pub frame: CMat,
    /// `eta_ij = e_i(eta_j)`, including the diagonal.
    pub eta_derivatives: CMat,
    /// Rotation coefficients, zero on the diagonal.
    pub gamma: CMat,
    /// Coefficients of the co-identity `sum eta_i nu^i`.
    pub co_identity: Vec<C64>,
}

fn relative_gap(values: &[C64]) -> f64 {
    let scale = values.iter().fold(1.0f64, |acc, v| acc.max(v.norm()));
    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            gap = gap.min((values[i] - values[j]).norm() / scale);
        }
    }
    gap
}

/// Splits the tangent algebra into idempotents and computes the chart data.
pub fn semisimple_split(p: &FrobeniusPoint, opts: &SplitOptions) -> Result<CanonicalChart> {
    let n = p.dim();
    let (probe, values) = match p.euler_operator() {
        Some(u) => {
            let values = linalg::eigenvalues(&u)?;
            let gap = relative_gap(&values);
            if gap < opts.tame_tol {
                return Err(Error::NotTame {
                    gap,
                    detail: "eigenvalues of E o are not simple".into(),
                });
            }
            (u, values)
        }
        None => random_probe(p, opts)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xa5a5);
    let seed_vector = p.identity_vector().unwrap_or_else(|| {
        CVec::from_fn(n, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    });
    let mut idempotents = linalg::zeros(n);
    for i in 0..n {
        let mut v = seed_vector.clone();
        for j in 0..n {
            if j != i {
                v = (&probe * &v - &v * values[j]) / (values[i] - values[j]);
            }
        }
        let e = normalize_idempotent(p, v)?;
        idempotents.set_column(i, &e);
    }
    let u = p.euler.as_ref().map(|_| values.clone());
    chart_from_idempotents(p, idempotents, u, values)
}

fn random_probe(p: &FrobeniusPoint, opts: &SplitOptions) -> Result<(CMat, Vec<C64>)> {
    let n = p.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best_gap = 0.0;
    for _ in 0..opts.retries.max(1) {
        let w = CVec::from_fn(n, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let probe = p.mult_by(&w);
        let values = linalg::eigenvalues(&probe)?;
        let gap = relative_gap(&values);
        if gap >= opts.tame_tol {
            return Ok((probe, values));
        }
        best_gap = f64::max(best_gap, gap);
    }
    Err(Error::NotTame {
        gap: best_gap,
        detail: "no random probe with simple spectrum".into(),
    })
}

/// Rescales an eigenvector of a multiplication operator to an idempotent,
/// followed by one Newton step on `e o e = e`.
fn normalize_idempotent(p: &FrobeniusPoint, v: CVec) -> Result<CVec> {
    let vv = p.product(&v, &v);
    let s = v.dotc(&vv) / v.dotc(&v);
    if s.norm() < 1e-300 {
        return Err(Error::NotTame {
            gap: 0.0,
            detail: "nilpotent direction in the tangent algebra".into(),
        });
    }
    let e = v / s;
    let residual = &e - p.product(&e, &e);
    let jac = p.mult_by(&e) * C64::new(2.0, 0.0) - linalg::identity(p.dim());
    let step = linalg::solve(
        &jac,
        &CMat::from_column_slice(p.dim(), 1, residual.as_slice()),
    )?;
    Ok(e + step.column(0))
}

/// Fills in `eta`, the frame and the rotation coefficients for given idempotents.
pub fn chart_from_idempotents(
    p: &FrobeniusPoint,
    idempotents: CMat,
    u: Option<Vec<C64>>,
    probe_values: Vec<C64>,
) -> Result<CanonicalChart> {
    let n = p.dim();
    let cols: Vec<CVec> = (0..n).map(|i| idempotents.column(i).into_owned()).collect();
    let eta: Vec<C64> = cols.iter().map(|e| p.inner(e, e)).collect();
    let scale = linalg::max_abs(&p.metric).max(1e-300);
    if let Some(i) = eta.iter().position(|e| e.norm() < 1e-12 * scale) {
        return Err(Error::DegenerateFrame(format!("eta_{i} vanishes")));
    }
    let sqrt_eta: Vec<C64> = eta.iter().map(|e| e.sqrt()).collect();
    let frame = CMat::from_fn(n, n, |a, i| cols[i][a] / sqrt_eta[i]);
    let mut eta_derivatives = linalg::zeros(n);
    for i in 0..n {
        for j in 0..n {
            eta_derivatives[(i, j)] = eta_derivative(p, &cols[i], &cols[j]);
        }
    }
    let gamma = CMat::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(0.0, 0.0)
        } else {
            eta_derivatives[(i, j)] / (sqrt_eta[i] * sqrt_eta[j] * 2.0)
        }
    });
    Ok(CanonicalChart {
        u,
        probe_values,
        idempotents,
        co_identity: eta.clone(),
        eta,
        sqrt_eta,
        branches: vec![1; n],
        frame,
        eta_derivatives,
        gamma,
    })
}

/// `e_i(eta_j) = -2 sum d_a Phi_bcd e_i^a e_j^b e_j^c e_j^d`.
///
/// Differentiating `e_j o e_j = e_j` along `e_i` shows that the `e_j`-component
/// of the derivative of `e_j` is `-g((d_{e_i} A)(e_j, e_j), e_j) / eta_j`.
fn eta_derivative(p: &FrobeniusPoint, ei: &CVec, ej: &CVec) -> C64 {
    let n = p.dim();
    let mut s = C64::new(0.0, 0.0);
    for a in 0..n {
        if ei[a] == C64::new(0.0, 0.0) {
            continue;
        }
        let t = &p.lowered_derivatives[a];
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    s += ei[a] * ej[b] * ej[c] * ej[d] * t.get(b, c, d);
                }
            }
        }
    }
    s * -2.0
}

impl CanonicalChart {
    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    /// Relabels idempotents: new label `k` carries old label `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> CanonicalChart {
        let n = self.dim();
        let pick = |m: &CMat| CMat::from_fn(m.nrows(), n, |a, k| m[(a, perm[k])]);
        CanonicalChart {
            u: self
                .u
                .as_ref()
                .map(|u| perm.iter().map(|&i| u[i]).collect()),
            probe_values: perm.iter().map(|&i| self.probe_values[i]).collect(),
            idempotents: pick(&self.idempotents),
            eta: perm.iter().map(|&i| self.eta[i]).collect(),
            sqrt_eta: perm.iter().map(|&i| self.sqrt_eta[i]).collect(),
            branches: perm.iter().map(|&i| self.branches[i]).collect(),
            frame: pick(&self.frame),
            eta_derivatives: CMat::from_fn(n, n, |k, l| self.eta_derivatives[(perm[k], perm[l])]),
            gamma: CMat::from_fn(n, n, |k, l| self.gamma[(perm[k], perm[l])]),
            co_identity: perm.iter().map(|&i| self.co_identity[i]).collect(),
        }
    }

    /// Flips the square-root branch of `eta_i`.
    pub fn flip_branch(&mut self, i: usize) {
        let n = self.dim();
        self.sqrt_eta[i] = -self.sqrt_eta[i];
        self.branches[i] = -self.branches[i];
        for a in 0..self.frame.nrows() {
            self.frame[(a, i)] = -self.frame[(a, i)];
        }
        for j in 0..n {
            if j != i {
                self.gamma[(i, j)] = -self.gamma[(i, j)];
                self.gamma[(j, i)] = -self.gamma[(j, i)];
            }
        }
    }

    /// Matches labels to a nearby reference chart (nearest canonical value, or
    /// nearest idempotent without an Euler field) and aligns square-root branches.
    pub fn aligned_to(&self, reference: &CanonicalChart) -> Result<CanonicalChart> {
        let n = self.dim();
        let distance = |k: usize, i: usize| -> f64 {
            match (&reference.u, &self.u) {
                (Some(ru), Some(su)) => (ru[k] - su[i]).norm(),
                _ => (reference.idempotents.column(k) - self.idempotents.column(i)).norm(),
            }
        };
        let mut perm = vec![usize::MAX; n];
        for k in 0..n {
            let mut order: Vec<(f64, usize)> = (0..n).map(|i| (distance(k, i), i)).collect();
            order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
            let (best, second) = (
                order[0],
                order.get(1).copied().unwrap_or((f64::INFINITY, 0)),
            );
            if best.0 * 4.0 >= second.0 {
                return Err(Error::NotTame {
                    gap: second.0,
                    detail: format!("ambiguous label matching for {k}"),
                });
            }
            perm[k] = best.1;
        }
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != n {
            return Err(Error::NotTame {
                gap: 0.0,
                detail: "label matching is not a bijection".into(),
            });
        }
        let mut out = self.permuted(&perm);
        for i in 0..n {
            if (out.sqrt_eta[i] - reference.sqrt_eta[i]).norm()
                > (out.sqrt_eta[i] + reference.sqrt_eta[i]).norm()
            {
                out.flip_branch(i);
            }
        }
        Ok(out)
    }

    /// Residuals of the chart invariants: idempotency, partition of unity, orthogonality, symmetry of gamma.
    pub fn invariant_residuals(&self, p: &FrobeniusPoint) -> ChartResiduals {
        let n = self.dim();
        let cols: Vec<CVec> = (0..n)
            .map(|i| self.idempotents.column(i).into_owned())
            .collect();
        let mut idempotency: f64 = 0.0;
        let mut orthogonality: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let prod = p.product(&cols[i], &cols[j]);
                let expected = if i == j {
                    cols[i].clone()
                } else {
                    CVec::zeros(n)
                };
                idempotency = idempotency.max((prod - expected).norm());
                let g = p.inner(&cols[i], &cols[j]);
                let expected = if i == j {
                    self.eta[i]
                } else {
                    C64::new(0.0, 0.0)
                };
                orthogonality = orthogonality.max((g - expected).norm());
            }
        }
        let sum: CVec = cols.iter().fold(CVec::zeros(n), |acc, c| acc + c);
        let unity = p.identity_vector().map(|e| (sum - e).norm());
        let gamma_symmetry = linalg::max_abs(&(&self.gamma - self.gamma.transpose()));
        ChartResiduals {
            idempotency,
            orthogonality,
            unity,
            gamma_symmetry,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartResiduals {
    pub idempotency: f64,
    pub orthogonality: f64,
    pub unity: Option<f64>,
    pub gamma_symmetry: f64,
}

/// Which basis an [`OperatorPair`] is written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    Flat,
    Normalized,
}

#[derive(Clone, Debug)]
pub struct OperatorPair {
    pub frame: Frame,
    pub u: CMat,
    pub v: CMat,
}

/// `U` and `V` in both frames, with the consistency checks between them.
#[derive(Clone, Debug)]
pub struct UvOperators {
    pub flat: OperatorPair,
    pub normalized: OperatorPair,
    /// `V` in the frame `f_i` from rotation coefficients: column `i` holds `V(f_i)`.
    pub v_from_rotation: CMat,
    /// `max |V_normalized - v_from_rotation|`.
    pub agreement: f64,
    /// `max |g V + V^T g|`.
    pub skew_residual: f64,
    /// Largest off-diagonal entry of `U` in the frame `f_i`, and the largest `|U_ii - u^i|`.
    pub diagonal_defect: f64,
}

pub fn uv_operators(p: &FrobeniusPoint, chart: &CanonicalChart) -> Result<UvOperators> {
    let euler = p
        .euler
        .as_ref()
        .ok_or_else(|| Error::InvalidModel("U and V need an Euler field".into()))?;
    let u_vals = chart
        .u
        .as_ref()
        .ok_or_else(|| Error::InvalidModel("chart has no canonical values".into()))?;
    if let Some(i) = chart.eta.iter().position(|e| e.norm() == 0.0) {
        return Err(Error::DegenerateFrame(format!("eta_{i} = 0")));
    }
    let n = p.dim();
    let u_flat = p.euler_operator().expect("Euler data present");
    let v_flat = euler.v_flat();
    let f_inv = linalg::inverse(&chart.frame)
        .map_err(|_| Error::DegenerateFrame("frame is singular".into()))?;
    let u_norm = &f_inv * &u_flat * &chart.frame;
    let v_norm = &f_inv * &v_flat * &chart.frame;
    let v_rot = CMat::from_fn(n, n, |j, i| {
        if i == j {
            C64::new(0.0, 0.0)
        } else {
            (u_vals[j] - u_vals[i]) * chart.gamma[(i, j)]
        }
    });
    let agreement = linalg::max_abs(&(&v_norm - &v_rot));
    let skew_residual = linalg::max_abs(&(&p.metric * &v_flat + v_flat.transpose() * &p.metric));
    let mut diagonal_defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let expected = if i == j {
                u_vals[i]
            } else {
                C64::new(0.0, 0.0)
            };
            diagonal_defect = diagonal_defect.max((u_norm[(i, j)] - expected).norm());
        }
    }
    Ok(UvOperators {
        flat: OperatorPair {
            frame: Frame::Flat,
            u: u_flat,
            v: v_flat,
        },
        normalized: OperatorPair {
            frame: Frame::Normalized,
            u: u_norm,
            v: v_norm,
        },
        v_from_rotation: v_rot,
        agreement,
        skew_residual,
        diagonal_defect,
    })
}

/// `g((E - lambda)^{-1} o X, Y)` in the flat basis versus
/// `sum_i (u^i - lambda)^{-1} eta_i (du^i)^2`; returns the largest entry difference.
pub fn pencil_metric_residual(
    p: &FrobeniusPoint,
    chart: &CanonicalChart,
    lambda: C64,
) -> Result<f64> {
    let u_vals = chart
        .u
        .as_ref()
        .ok_or_else(|| Error::InvalidModel("pencil metric needs canonical values".into()))?;
    let n = p.dim();
    let u = p
        .euler_operator()
        .expect("canonical values imply Euler data");
    let resolvent = linalg::inverse(&(u - linalg::identity(n) * lambda))?;
    let flat = resolvent.transpose() * &p.metric;
    let coframe = linalg::inverse(&chart.idempotents)?;
    let weights: Vec<C64> = (0..n)
        .map(|i| chart.eta[i] / (u_vals[i] - lambda))
        .collect();
    let canonical = coframe.transpose() * linalg::diag(&weights) * &coframe;
    Ok(linalg::max_abs(&(flat - canonical)))
}

/// `|prod eta_i - det(g) det(idempotents)^2|`, relative to the larger side.
pub fn determinant_identity_residual(p: &FrobeniusPoint, chart: &CanonicalChart) -> f64 {
    let lhs: C64 = chart.eta.iter().product();
    let det_f = chart.idempotents.determinant();
    let rhs = p.metric.determinant() * det_f * det_f;
    (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1e-300)
}

/// The structure connections of a Frobenius manifold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Connection {
    First,
    Extended,
    Second,
    Deformed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionReport {
    pub which: Connection,
    /// Largest curvature component for each sampled `lambda`.
    pub per_lambda: Vec<f64>,
    /// For the first connection: `max |d_a L_b - d_b L_a|`.
    pub r1: Option<f64>,
    /// For the first connection: `max |[L_a, L_b]|`.
    pub r2: Option<f64>,
    /// Largest deviation of the sampled curvature from the quadratic fit `lambda R1 + lambda^2 R2`.
    pub fit_defect: Option<f64>,
    pub max: f64,
}

fn check_lambda(u_vals: &[C64], lambda: C64) -> Result<()> {
    let scale = u_vals.iter().fold(1.0f64, |acc, u| acc.max(u.norm()));
    for (i, u) in u_vals.iter().enumerate() {
        let d = (u - lambda).norm();
        if d < 1e-6 * scale {
            return Err(Error::PoleProximity {
                i,
                j: i,
                distance: d,
            });
        }
    }
    Ok(())
}

/// Curvature of one of the structure connections at `x`.
///
/// `step` is the finite-difference step for spatial derivatives of the
/// second and deformed connections (default `1e-5 (1 + |x_a|)`).
pub fn connection_residual<M: FrobeniusModel + ?Sized>(
    model: &M,
    x: &[C64],
    which: Connection,
    lambdas: &[C64],
    step: Option<f64>,
) -> Result<ConnectionReport> {
    let p = build_point(model, x)?;
    let n = p.dim();
    let ls: Vec<CMat> = (0..n).map(|a| p.mult_operator(a)).collect();
    let dls: Vec<Vec<CMat>> = (0..n)
        .map(|d| (0..n).map(|a| p.mult_operator_derivative(d, a)).collect())
        .collect();
    match which {
        Connection::First => {
            let mut r1: f64 = 0.0;
            let mut r2: f64 = 0.0;
            let mut per_lambda = Vec::new();
            let mut fit_defect: f64 = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let c1 = &dls[a][b] - &dls[b][a];
                    let c2 = linalg::commutator(&ls[a], &ls[b]);
                    r1 = r1.max(linalg::max_abs(&c1));
                    r2 = r2.max(linalg::max_abs(&c2));
                }
            }
            // Sample the full curvature and refit lambda R1 + lambda^2 R2 + R0.
            let samples: Vec<C64> = if lambdas.len() >= 3 {
                lambdas.to_vec()
            } else {
                vec![C64::new(0.5, 0.0), C64::new(-1.0, 0.3), C64::new(2.0, -0.7)]
            };
            for a in 0..n {
                for b in 0..n {
                    let curv: Vec<CMat> = samples
                        .iter()
                        .map(|&l| {
                            let om_a = &ls[a] * l;
                            let om_b = &ls[b] * l;
                            (&dls[a][b] - &dls[b][a]) * l + linalg::commutator(&om_a, &om_b)
                        })
                        .collect();
                    let (c0, _, _) = quadratic_fit(&samples[..3], &curv[..3])?;
                    fit_defect = fit_defect.max(linalg::max_abs(&c0));
                }
            }
            for &l in lambdas {
                let mut worst: f64 = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        let f = (&dls[a][b] - &dls[b][a]) * l
                            + linalg::commutator(&ls[a], &ls[b]) * (l * l);
                        worst = worst.max(linalg::max_abs(&f));
                    }
                }
                per_lambda.push(worst);
            }
            let max = r1.max(r2).max(fit_defect);
            Ok(ConnectionReport {
                which,
                per_lambda,
                r1: Some(r1),
                r2: Some(r2),
                fit_defect: Some(fit_defect),
                max,
            })
        }
        Connection::Extended => {
            let euler = p.euler.clone().ok_or_else(|| {
                Error::InvalidModel("extended connection needs Euler data".into())
            })?;
            if euler.d0 == 0.0 {
                return Err(Error::InvalidModel(
                    "extended connection needs d0 != 0".into(),
                ));
            }
            let u = p.euler_operator().expect("Euler data present");
            let q = &euler.linear;
            let evec = euler.vector_at(x);
            let mut per_lambda = Vec::new();
            for &l in lambdas {
                if l.norm() < 1e-12 {
                    return Err(Error::PoleProximity {
                        i: 0,
                        j: 0,
                        distance: l.norm(),
                    });
                }
                let mut worst: f64 = 0.0;
                for a in 0..n {
                    // d_a U = sum_e Q^e_a L_e + sum_e E^e d_a L_e
                    let mut du = linalg::zeros(n);
                    for e in 0..n {
                        du += &ls[e] * q[(e, a)] + &dls[a][e] * evec[e];
                    }
                    let inv_d0 = C64::new(1.0 / euler.d0, 0.0);
                    let f = &du * inv_d0 - &ls[a]
                        + linalg::commutator(&ls[a], &u) * (l / euler.d0)
                        + linalg::commutator(&ls[a], q) * inv_d0;
                    worst = worst.max(linalg::max_abs(&f));
                    for b in 0..n {
                        let f = (&dls[a][b] - &dls[b][a]) * l
                            + linalg::commutator(&ls[a], &ls[b]) * (l * l);
                        worst = worst.max(linalg::max_abs(&f));
                    }
                }
                per_lambda.push(worst);
            }
            let max = per_lambda.iter().fold(0.0f64, |a, &b| a.max(b));
            Ok(ConnectionReport {
                which,
                per_lambda,
                r1: None,
                r2: None,
                fit_defect: None,
                max,
            })
        }
        Connection::Second | Connection::Deformed(_) => {
            let s = if let Connection::Deformed(s) = which {
                s
            } else {
                0.0
            };
            let euler = p
                .euler
                .clone()
                .ok_or_else(|| Error::InvalidModel("second connection needs Euler data".into()))?;
            let u_vals = linalg::eigenvalues(&p.euler_operator().expect("Euler data present"))?;
            let mut per_lambda = Vec::new();
            for &l in lambdas {
                check_lambda(&u_vals, l)?;
                per_lambda.push(second_curvature(model, &p, &euler, l, s, step)?);
            }
            let max = per_lambda.iter().fold(0.0f64, |a, &b| a.max(b));
            Ok(ConnectionReport {
                which,
                per_lambda,
                r1: None,
                r2: None,
                fit_defect: None,
                max,
            })
        }
    }
}

/// Solves `F(l) = C0 + l C1 + l^2 C2` from three samples.
fn quadratic_fit(ls: &[C64], fs: &[CMat]) -> Result<(CMat, CMat, CMat)> {
    let vander = CMat::from_fn(3, 3, |i, k| ls[i].powu(k as u32));
    let inv = linalg::inverse(&vander)?;
    let combine = |k: usize| -> CMat {
        (0..3).fold(linalg::zeros(fs[0].nrows()), |acc, i| {
            acc + &fs[i] * inv[(k, i)]
        })
    };
    Ok((combine(0), combine(1), combine(2)))
}

/// Connection matrices of the (deformed) second structure connection:
/// `Omega_a = -(V + 1/2 + s)(U - lambda)^{-1} L_a`, `Omega_lambda = (V + 1/2 + s)(U - lambda)^{-1}`.
fn second_connection_matrices(
    p: &FrobeniusPoint,
    euler: &EulerData,
    lambda: C64,
    s: f64,
) -> Result<(Vec<CMat>, CMat, CMat)> {
    let n = p.dim();
    let u = p.euler_operator().expect("Euler data present");
    let shifted = euler.v_flat() + linalg::identity(n) * C64::new(0.5 + s, 0.0);
    let resolvent = linalg::inverse(&(u - linalg::identity(n) * lambda))?;
    let omega_lambda = &shifted * &resolvent;
    let omegas = (0..n)
        .map(|a| -(&omega_lambda * p.mult_operator(a)))
        .collect();
    Ok((omegas, omega_lambda, resolvent))
}

fn second_curvature<M: FrobeniusModel + ?Sized>(
    model: &M,
    p: &FrobeniusPoint,
    euler: &EulerData,
    lambda: C64,
    s: f64,
    step: Option<f64>,
) -> Result<f64> {
    let n = p.dim();
    let (omegas, omega_lambda, resolvent) = second_connection_matrices(p, euler, lambda, s)?;
    // Spatial derivatives of all connection matrices, one direction at a time.
    let mut d_omegas: Vec<Vec<CMat>> = Vec::with_capacity(n);
    let mut d_omega_lambda: Vec<CMat> = Vec::with_capacity(n);
    for d in 0..n {
        let h = step.unwrap_or_else(|| default_step(p.x[d]));
        let mut failure: Option<Error> = None;
        let flat = central_richardson(
            |t| {
                let mut y = p.x.clone();
                y[d] += t;
                let eval = build_point(model, &y)
                    .and_then(|q| second_connection_matrices(&q, euler, lambda, s));
                match eval {
                    Ok((om, oml, _)) => om
                        .iter()
                        .chain(core::iter::once(&oml))
                        .flat_map(|m| m.iter().copied())
                        .collect(),
                    Err(e) => {
                        failure = Some(e);
                        vec![C64::new(0.0, 0.0); (n + 1) * n * n]
                    }
                }
            },
            h,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let mats: Vec<CMat> = flat
            .chunks(n * n)
            .map(|c| CMat::from_column_slice(n, n, c))
            .collect();
        d_omega_lambda.push(mats[n].clone());
        d_omegas.push(mats[..n].to_vec());
    }
    let shifted = euler.v_flat() + linalg::identity(n) * C64::new(0.5 + s, 0.0);
    let scale = 1.0
        + omegas
            .iter()
            .fold(linalg::max_abs(&omega_lambda), |acc, m| {
                acc.max(linalg::max_abs(m))
            });
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let f = &d_omegas[a][b] - &d_omegas[b][a] + linalg::commutator(&omegas[a], &omegas[b]);
            worst = worst.max(linalg::max_abs(&f));
        }
        // d_lambda Omega_a = -(V + 1/2 + s)(U - lambda)^{-2} L_a
        let dl_omega_a = -(&shifted * &resolvent * &resolvent * p.mult_operator(a));
        let f = &d_omega_lambda[a] - dl_omega_a + linalg::commutator(&omegas[a], &omega_lambda);
        worst = worst.max(linalg::max_abs(&f));
    }
    Ok(worst / scale)
}

/// Residuals of the Darboux–Egoroff system and of the homogeneity condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DarbouxEgoroffReport {
    /// `max |e_k gamma_ij - gamma_ik gamma_kj|` over distinct `i, j, k`; `None` for `n < 3`.
    pub rotation: Option<f64>,
    /// `max |sum_k e_k gamma_ij|`.
    pub identity: f64,
    /// `max |sum_k u^k e_k gamma_ij + gamma_ij|`; `None` without canonical values.
    pub homogeneity: Option<f64>,
}

/// Evaluates the residuals from `gamma` and its canonical derivatives
/// (`derivatives[k] = e_k gamma`).
pub fn darboux_egoroff_from_derivatives(
    gamma: &CMat,
    derivatives: &[CMat],
    u: Option<&[C64]>,
) -> DarbouxEgoroffReport {
    let n = gamma.nrows();
    let mut rotation: f64 = 0.0;
    let mut identity: f64 = 0.0;
    let mut homogeneity: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut sum = C64::new(0.0, 0.0);
            let mut euler = gamma[(i, j)];
            for k in 0..n {
                sum += derivatives[k][(i, j)];
                if let Some(u) = u {
                    euler += u[k] * derivatives[k][(i, j)];
                }
                if k != i && k != j {
                    rotation = rotation
                        .max((derivatives[k][(i, j)] - gamma[(i, k)] * gamma[(k, j)]).norm());
                }
            }
            identity = identity.max(sum.norm());
            homogeneity = homogeneity.max(euler.norm());
        }
    }
    DarbouxEgoroffReport {
        rotation: (n >= 3).then_some(rotation),
        identity,
        homogeneity: u.map(|_| homogeneity),
    }
}

/// Canonical derivatives `e_k gamma_ij` from charts on a central stencil around `x`.
pub fn rotation_derivatives<M: FrobeniusModel + ?Sized>(
    model: &M,
    x: &[C64],
    step: Option<f64>,
    opts: &SplitOptions,
) -> Result<(CanonicalChart, Vec<CMat>)> {
    let base = semisimple_split(&build_point(model, x)?, opts)?;
    let n = base.dim();
    let mut flat_derivs: Vec<CMat> = Vec::with_capacity(n);
    for a in 0..n {
        let h = step.unwrap_or_else(|| default_step(x[a]));
        let mut failure: Option<Error> = None;
        let values = central_richardson(
            |t| {
                let mut y = x.to_vec();
                y[a] += t;
                let chart = build_point(model, &y)
                    .and_then(|q| semisimple_split(&q, opts))
                    .and_then(|c| c.aligned_to(&base));
                match chart {
                    Ok(c) => c.gamma.iter().copied().collect(),
                    Err(e) => {
                        failure = Some(e);
                        vec![C64::new(0.0, 0.0); n * n]
                    }
                }
            },
            h,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        flat_derivs.push(CMat::from_column_slice(n, n, &values));
    }
    let derivatives = (0..n)
        .map(|k| {
            (0..n).fold(linalg::zeros(n), |acc, a| {
                acc + &flat_derivs[a] * base.idempotents[(a, k)]
            })
        })
        .collect();
    Ok((base, derivatives))
}

/// Darboux–Egoroff residuals at `x` via a finite-difference stencil.
pub fn darboux_egoroff_residual<M: FrobeniusModel + ?Sized>(
    model: &M,
    x: &[C64],
    step: Option<f64>,
    opts: &SplitOptions,
) -> Result<DarbouxEgoroffReport> {
    let (chart, derivatives) = rotation_derivatives(model, x, step, opts)?;
    Ok(darboux_egoroff_from_derivatives(
        &chart.gamma,
        &derivatives,
        chart.u.as_deref(),
    ))
}

/// Residuals of the Euler-field axioms at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct EulerReport {
    /// `max |Q^T g + g Q - D g|`.
    pub conformal: f64,
    /// `max |Lie_E A - d0 A|`.
    pub product: f64,
    /// Third derivatives of `E Phi - (d0 + D) Phi`.
    pub potential: f64,
    /// `max |(d_a + d_b - D) g_ab|` when `Q` is diagonal.
    pub grading: Option<f64>,
    /// `g(e, e)` for the flat identity.
    pub identity_norm: Option<C64>,
    /// Whether `g(e, e)` must vanish, i.e. `D != 2 d0`.
    pub identity_norm_must_vanish: bool,
}

impl EulerReport {
    pub fn max(&self) -> f64 {
        let mut m = self.conformal.max(self.product).max(self.potential);
        if let Some(g) = self.grading {
            m = m.max(g);
        }
        if let (true, Some(v)) = (self.identity_norm_must_vanish, self.identity_norm) {
            m = m.max(v.norm());
        }
        m
    }
}

pub fn euler_check(p: &FrobeniusPoint) -> Result<EulerReport> {
    let euler = p
        .euler
        .as_ref()
        .ok_or_else(|| Error::InvalidModel("no Euler data".into()))?;
    let n = p.dim();
    let q = &euler.linear;
    let g = &p.metric;
    let conformal = linalg::max_abs(&(q.transpose() * g + g * q - g * C64::new(euler.charge, 0.0)));
    let evec = euler.vector_at(&p.x);
    let dstruct: Vec<Tensor3> = (0..n).map(|d| p.structure_derivative(d)).collect();
    let mut product: f64 = 0.0;
    let mut potential: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut lie = C64::new(0.0, 0.0);
                let mut pot = -p.lowered.get(a, b, c) * (euler.d0 + euler.charge);
                for e in 0..n {
                    lie += evec[e] * dstruct[e].get(a, b, c)
                        + p.structure.get(e, b, c) * q[(e, a)]
                        + p.structure.get(a, e, c) * q[(e, b)]
                        - q[(c, e)] * p.structure.get(a, b, e);
                    pot += evec[e] * p.lowered_derivatives[e].get(a, b, c)
                        + q[(e, a)] * p.lowered.get(e, b, c)
                        + q[(e, b)] * p.lowered.get(a, e, c)
                        + q[(e, c)] * p.lowered.get(a, b, e);
                }
                product = product.max((lie - p.structure.get(a, b, c) * euler.d0).norm());
                potential = potential.max(pot.norm());
            }
        }
    }
    let diagonal = (0..n).all(|a| (0..n).all(|b| a == b || q[(a, b)].norm() == 0.0));
    let grading = diagonal.then(|| {
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let w = (q[(a, a)] + q[(b, b)] - euler.charge) * g[(a, b)];
                worst = worst.max(w.norm());
            }
        }
        worst
    });
    let identity_norm = p.identity_vector().map(|e| p.inner(&e, &e));
    Ok(EulerReport {
        conformal,
        product,
        potential,
        grading,
        identity_norm,
        identity_norm_must_vanish: (euler.charge - 2.0 * euler.d0).abs() > 1e-12,
    })
}

/// A model defined by closures, convenient for small examples.
pub struct ClosureModel {
    pub dim: usize,
    pub metric: CMat,
    pub lowered: Box<dyn Fn(&[C64]) -> Tensor3 + Send + Sync>,
    pub lowered_derivatives: Option<Box<dyn Fn(&[C64]) -> Vec<Tensor3> + Send + Sync>>,
    pub euler: Option<EulerData>,
    pub identity: Option<usize>,
}

impl FrobeniusModel for ClosureModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self) -> CMat {
        self.metric.clone()
    }

    fn lowered_structure(&self, x: &[C64]) -> Result<Tensor3> {
        Ok((self.lowered)(x))
    }

    fn lowered_structure_derivatives(&self, x: &[C64]) -> Result<Vec<Tensor3>> {
        match &self.lowered_derivatives {
            Some(f) => Ok(f(x)),
            None => {
                let n = self.dim;
                let mut out = Vec::with_capacity(n);
                for d in 0..n {
                    let h = default_step(x[d]);
                    let values = central_richardson(
                        |s| {
                            let mut y = x.to_vec();
                            y[d] += s;
                            (self.lowered)(&y).data
                        },
                        h,
                    );
                    out.push(Tensor3 { n, data: values });
                }
                Ok(out)
            }
        }
    }

    fn euler(&self) -> Option<EulerData> {
        self.euler.clone()
    }

    fn identity_index(&self) -> Option<usize> {
        self.identity
    }
}

/// Quantum cohomology of `P^1`: `Phi = x0^2 x1 / 2 + e^{x1}`.
pub fn projective_line() -> ClosureModel {
    let c = |v: f64| C64::new(v, 0.0);
    let lowered = |x: &[C64]| {
        Tensor3::from_fn(2, |a, b, cc| match a + b + cc {
            1 => C64::new(1.0, 0.0),
            3 => x[1].exp(),
            _ => C64::new(0.0, 0.0),
        })
    };
    let derivs = |x: &[C64]| {
        let mut d1 = Tensor3::zeros(2);
        d1.set(1, 1, 1, x[1].exp());
        vec![Tensor3::zeros(2), d1]
    };
    ClosureModel {
        dim: 2,
        metric: CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]),
        lowered: Box::new(lowered),
        lowered_derivatives: Some(Box::new(derivs)),
        euler: Some(EulerData {
            linear: CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]),
            shift: vec![c(0.0), c(2.0)],
            d0: 1.0,
            charge: 1.0,
        }),
        identity: Some(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gw_recursion::compute_gw_table;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn p2() -> TruncatedPotential {
        TruncatedPotential::new(compute_gw_table(2, 3).unwrap())
    }

    #[test]
    fn one_dimensional_algebra() {
        let model = ClosureModel {
            dim: 1,
            metric: CMat::from_element(1, 1, c(1.0, 0.0)),
            lowered: Box::new(|_| Tensor3::from_fn(1, |_, _, _| C64::new(1.0, 0.0))),
            lowered_derivatives: None,
            euler: None,
            identity: Some(0),
        };
        let p = build_point(&model, &[c(0.3, 0.0)]).unwrap();
        assert_eq!(p.structure.get(0, 0, 0), c(1.0, 0.0));
        assert_eq!(associativity_residual(&p), 0.0);
    }

    #[test]
    fn projective_line_split() {
        let model = projective_line();
        let x = [c(0.4, 0.1), c(-0.3, 0.2)];
        let p = build_point(&model, &x).unwrap();
        let chart = semisimple_split(&p, &SplitOptions::default()).unwrap();
        let half = (x[1] / 2.0).exp();
        let mut u = chart.u.clone().unwrap();
        u.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((u[0] - (x[0] - half * 2.0)).norm() < 1e-12);
        assert!((u[1] - (x[0] + half * 2.0)).norm() < 1e-12);
        for i in 0..2 {
            let e = chart.idempotents.column(i);
            let sign = if (chart.u.as_ref().unwrap()[i] - x[0]).re > 0.0 {
                1.0
            } else {
                -1.0
            };
            assert!((e[0] - c(0.5, 0.0)).norm() < 1e-12);
            assert!((e[1] - (-x[1] / 2.0).exp() * (0.5 * sign)).norm() < 1e-12);
        }
        let res = chart.invariant_residuals(&p);
        assert!(res.idempotency < 1e-12 && res.orthogonality < 1e-12 && res.unity.unwrap() < 1e-12);
        assert!(res.gamma_symmetry < 1e-12);
    }

    #[test]
    fn already_split_algebra() {
        let n = 3;
        let eta = [c(1.0, 0.0), c(2.0, 0.0), c(-0.5, 0.0)];
        let model = ClosureModel {
            dim: n,
            metric: linalg::diag(&eta),
            lowered: Box::new(move |_| {
                Tensor3::from_fn(3, |a, b, cc| {
                    if a == b && b == cc {
                        eta[a]
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
            }),
            lowered_derivatives: None,
            euler: None,
            identity: None,
        };
        let p = build_point(&model, &[c(0.0, 0.0); 3]).unwrap();
        let chart = semisimple_split(&p, &SplitOptions::default()).unwrap();
        let mut seen = [false; 3];
        for i in 0..n {
            let col = chart.idempotents.column(i);
            let k = (0..n)
                .find(|&k| (col[k] - c(1.0, 0.0)).norm() < 1e-12)
                .unwrap();
            seen[k] = true;
            assert!((col.norm() - 1.0).abs() < 1e-12);
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn projective_plane_canonical_values() {
        let model = p2();
        let x = [c(0.3, 0.0), c(-0.7, 0.0), c(0.0, 0.0)];
        let p = build_point(&model, &x).unwrap();
        assert!(associativity_residual(&p) < 1e-12);
        assert!(p.identity_residual().unwrap() < 1e-15);
        let chart = semisimple_split(&p, &SplitOptions::default()).unwrap();
        let zeta = C64::from_polar(1.0, 2.0 * core::f64::consts::PI / 3.0);
        for k in 0..3 {
            let expected = x[0] + zeta.powu(k) * 3.0 * (x[1] / 3.0).exp();
            let found = chart
                .u
                .as_ref()
                .unwrap()
                .iter()
                .any(|u| (u - expected).norm() < 1e-10);
            assert!(found, "missing canonical value {expected}");
        }
        assert!(determinant_identity_residual(&p, &chart) < 1e-8);
        let uv = uv_operators(&p, &chart).unwrap();
        assert!(uv.agreement < 1e-8, "{}", uv.agreement);
        assert!(uv.skew_residual < 1e-14);
        assert!(uv.diagonal_defect < 1e-10);
        let e = p.identity_vector().unwrap();
        let ve = &uv.flat.v * &e;
        assert!((ve - &e * c(1.0 - (2.0 - 2.0) / 2.0, 0.0)).norm() < 1e-14);
        assert!(pencil_metric_residual(&p, &chart, c(0.1, 0.9)).unwrap() < 1e-10);
    }

    #[test]
    fn relabelling_equivariance() {
        let model = p2();
        let x = [c(0.1, 0.0), c(0.2, 0.1), c(0.05, 0.0)];
        let p = build_point(&model, &x).unwrap();
        let chart = semisimple_split(&p, &SplitOptions::default()).unwrap();
        let perm = [2, 0, 1];
        let moved = chart.permuted(&perm);
        let back = moved.aligned_to(&chart).unwrap();
        assert!(linalg::max_abs(&(&back.gamma - &chart.gamma)) < 1e-14);
        for k in 0..3 {
            assert_eq!(moved.eta[k], chart.eta[perm[k]]);
            assert_eq!(
                moved.gamma[(k, (k + 1) % 3)],
                chart.gamma[(perm[k], perm[(k + 1) % 3])]
            );
        }
    }

    #[test]
    fn connections_on_projective_plane() {
        let model = p2();
        let x = [c(0.1, 0.0), c(-0.2, 0.05), c(0.03, -0.01)];
        let lambdas = [c(0.7, 0.4), c(-1.1, 0.2), c(2.3, -0.5)];
        let first = connection_residual(&model, &x, Connection::First, &lambdas, None).unwrap();
        assert!(first.max < 1e-8, "{first:?}");
        let ext = connection_residual(&model, &x, Connection::Extended, &lambdas, None).unwrap();
        assert!(ext.max < 1e-8, "{ext:?}");
        let second = connection_residual(&model, &x, Connection::Second, &lambdas, None).unwrap();
        assert!(second.max < 1e-7, "{second:?}");
        let deformed0 =
            connection_residual(&model, &x, Connection::Deformed(0.0), &lambdas, None).unwrap();
        assert_eq!(deformed0.per_lambda, second.per_lambda);
        let deformed =
            connection_residual(&model, &x, Connection::Deformed(0.8), &lambdas, None).unwrap();
        assert!(deformed.max < 1e-7, "{deformed:?}");
    }

    #[test]
    fn non_potential_structure_is_not_flat() {
        // Symmetric in (a, b) but with an x-dependence that is not a third derivative.
        let model = ClosureModel {
            dim: 2,
            metric: CMat::from_row_slice(
                2,
                2,
                &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            ),
            lowered: Box::new(|x: &[C64]| {
                Tensor3::from_fn(2, |a, b, cc| match (a + b, cc) {
                    (0, 1) | (1, 0) => C64::new(1.0, 0.0),
                    (2, 1) => x[0] * x[0],
                    _ => C64::new(0.0, 0.0),
                })
            }),
            lowered_derivatives: None,
            euler: None,
            identity: None,
        };
        let x = [c(0.5, 0.0), c(0.1, 0.0)];
        let rep = connection_residual(&model, &x, Connection::First, &[], None).unwrap();
        assert!(rep.r1.unwrap() > 0.1);
    }

    #[test]
    fn pole_proximity_for_second_connection() {
        let model = p2();
        let x = [c(0.3, 0.0), c(-0.7, 0.0), c(0.0, 0.0)];
        let u = x[0] + 3.0 * (x[1] / 3.0).exp();
        let err = connection_residual(&model, &x, Connection::Second, &[u], None).unwrap_err();
        assert!(matches!(err, Error::PoleProximity { .. }));
    }

    #[test]
    fn darboux_egoroff_on_projective_plane() {
        let model = TruncatedPotential::new(compute_gw_table(2, 4).unwrap());
        let x = [c(0.2, 0.0), c(-0.5, 0.1), c(0.02, 0.0)];
        let rep =
            darboux_egoroff_residual(&model, &x, Some(1e-4), &SplitOptions::default()).unwrap();
        assert!(rep.rotation.unwrap() < 1e-5, "{rep:?}");
        assert!(rep.identity < 1e-5, "{rep:?}");
        assert!(rep.homogeneity.unwrap() < 1e-5, "{rep:?}");
    }

    #[test]
    fn synthetic_darboux_egoroff_inputs() {
        let gamma =
            CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.3, 0.0), c(0.3, 0.0), c(0.0, 0.0)]);
        let zero = vec![linalg::zeros(2), linalg::zeros(2)];
        let rep =
            darboux_egoroff_from_derivatives(&gamma, &zero, Some(&[c(1.0, 0.0), c(2.0, 0.0)]));
        assert!(rep.rotation.is_none());
        assert_eq!(rep.identity, 0.0);
        assert!((rep.homogeneity.unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn euler_axioms_on_projective_spaces() {
        for r in 2..=4u32 {
            let model = TruncatedPotential::new(compute_gw_table(r, 2).unwrap());
            let x: Vec<C64> = (0..=r)
                .map(|a| c(0.05 * a as f64, -0.02 * a as f64))
                .collect();
            let p = build_point(&model, &x).unwrap();
            let rep = euler_check(&p).unwrap();
            assert!(rep.max() < 1e-7, "r = {r}: {rep:?}");
            assert!(rep.identity_norm_must_vanish);
        }
    }

    #[test]
    fn trivial_euler_field() {
        let model = ClosureModel {
            dim: 1,
            metric: CMat::from_element(1, 1, c(1.0, 0.0)),
            lowered: Box::new(|_| Tensor3::from_fn(1, |_, _, _| C64::new(1.0, 0.0))),
            lowered_derivatives: None,
            euler: Some(EulerData {
                linear: linalg::zeros(1),
                shift: vec![c(0.0, 0.0)],
                d0: 0.0,
                charge: 0.0,
            }),
            identity: None,
        };
        let p = build_point(&model, &[c(0.0, 0.0)]).unwrap();
        let rep = euler_check(&p).unwrap();
        assert_eq!(rep.conformal, 0.0);
        assert_eq!(rep.product, 0.0);
        let model = ClosureModel {
            euler: Some(EulerData {
                d0: 2.0,
                ..model.euler.clone().unwrap()
            }),
            ..model
        };
        let p = build_point(&model, &[c(0.0, 0.0)]).unwrap();
        assert!((euler_check(&p).unwrap().product - 2.0).abs() < 1e-15);
    }
}
