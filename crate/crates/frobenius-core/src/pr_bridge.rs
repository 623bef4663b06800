//! Quantum cohomology of `P^r` in closed form near the plane `x_2 = ... = x_r = 0`,
//! and its comparison with the numeric engine.

use crate::frobenius_geometry::{
    build_point, semisimple_split, EulerData, FrobeniusModel, SplitOptions, Tensor3,
};
use crate::gw_recursion::{compute_gw_table, GwTable, TruncatedPotential};
use crate::jet::{Jet, JetLayout};
use crate::linalg::{self, CMat, CVec};
use crate::schlesinger::{
    check_solution, CheckOptions, PoleSign, SchlesingerSystem, SolutionReport, SpecialInitData,
};
use crate::{Error, Result, C64};
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_traits::ToPrimitive;

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Closed-form data of `QH(P^r)` on the plane `x_2 = ... = x_r = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrClosedForms {
    pub r: usize,
    pub zeta: C64,
    pub x0: C64,
    pub x1: C64,
}

pub fn closed_forms(r: usize, x0: C64, x1: C64) -> Result<PrClosedForms> {
    if r < 2 {
        return Err(Error::InvalidParameter(format!(
            "r must be at least 2, got {r}"
        )));
    }
    let zeta = C64::from_polar(1.0, 2.0 * PI / (r + 1) as f64);
    Ok(PrClosedForms { r, zeta, x0, x1 })
}

impl PrClosedForms {
    pub fn n(&self) -> usize {
        self.r + 1
    }

    /// `zeta^k` for any integer `k`, reduced modulo `r + 1` first.
    pub fn zeta_pow(&self, k: i64) -> C64 {
        let n = self.n() as i64;
        C64::from_polar(1.0, 2.0 * PI * k.rem_euclid(n) as f64 / n as f64)
    }

    pub fn charge(&self) -> f64 {
        2.0 - self.r as f64
    }

    /// `u^i = x0 + zeta^i (r + 1) e^{x1/(r+1)}`.
    pub fn u(&self, i: usize) -> C64 {
        let n = self.n() as f64;
        self.x0 + self.zeta_pow(i as i64) * n * (self.x1 / n).exp()
    }

    /// `eta_i = zeta^i e^{-x1 r/(r+1)} / (r + 1)`.
    pub fn eta(&self, i: usize) -> C64 {
        let n = self.n() as f64;
        self.zeta_pow(i as i64) / n * (-self.x1 * (self.r as f64 / n)).exp()
    }

    /// `v_jk = -zeta^{j-k} / (1 - zeta^{j-k})`, zero on the diagonal.
    pub fn v(&self, j: usize, k: usize) -> C64 {
        if j == k {
            return real(0.0);
        }
        let z = self.zeta_pow(j as i64 - k as i64);
        -z / (real(1.0) - z)
    }

    /// `eta_ki = e_k eta_i = -2 zeta^{i-k} / (zeta^{i-k} - 1)^2 e^{-x1} / (r+1)^2` for `i != k`.
    pub fn eta_derivative(&self, k: usize, i: usize) -> Option<C64> {
        if i == k {
            return None;
        }
        let z = self.zeta_pow(i as i64 - k as i64);
        let n = self.n() as f64;
        Some(z * -2.0 / ((z - 1.0) * (z - 1.0)) * (-self.x1).exp() / (n * n))
    }

    pub fn u_vec(&self) -> Vec<C64> {
        (0..self.n()).map(|i| self.u(i)).collect()
    }

    pub fn eta_vec(&self) -> Vec<C64> {
        (0..self.n()).map(|i| self.eta(i)).collect()
    }

    pub fn v_matrix(&self) -> CMat {
        CMat::from_fn(self.n(), self.n(), |j, k| self.v(j, k))
    }

    pub fn init_data(&self) -> SpecialInitData {
        SpecialInitData {
            charge: self.charge(),
            eta: self.eta_vec(),
            v: self.v_matrix(),
        }
    }
}

/// `I(1; a)` with divisor and fundamental-class insertions removed.
fn degree_one(table: &GwTable, insertions: &[u32]) -> Result<f64> {
    if insertions.contains(&0) {
        return Ok(0.0);
    }
    let rest: Vec<u32> = insertions.iter().copied().filter(|&a| a != 1).collect();
    if rest.len() < 2 {
        return Ok(0.0);
    }
    let value = table
        .value(1, &rest)
        .ok_or_else(|| Error::InvalidParameter(format!("table lacks I(1; {rest:?})")))?;
    value
        .to_f64()
        .ok_or_else(|| Error::InvalidData("invariant does not fit in f64".into()))
}

/// Idempotents, canonical coordinates and metric modulo `J^2`, where `J` is
/// the ideal of `x_2, ..., x_r`.
///
/// Every scalar is a first-order jet in `(x_1, x_2, ..., x_r)` at `(x1, 0, ..., 0)`:
/// jet variable `0` is `x_1` and variable `b - 1` is `x_b`.
#[derive(Clone, Debug)]
pub struct PerturbativeChart {
    pub r: usize,
    pub x0: C64,
    pub x1: C64,
    /// `idempotents[i][a]`: flat component `a` of `e_i`.
    pub idempotents: Vec<Vec<Jet>>,
    /// `eta_i = e_i x_r`.
    pub eta: Vec<Jet>,
    pub u: Vec<Jet>,
    /// `e_k eta_i` on the plane, row `k`, column `i`.
    pub eta_derivatives: CMat,
    /// `e_i u^j` on the plane, row `i`, column `j`.
    pub u_derivatives: CMat,
    /// `max |e_i o e_j - delta_ij e_i|` on the plane.
    pub product_residual: f64,
    /// `|sum e_i - d_0|` on the plane.
    pub unity_residual: f64,
}

type JetVec = Vec<Jet>;
type JetMat = Vec<Vec<Jet>>;

struct JetAlgebra {
    n: usize,
    layout: Arc<JetLayout>,
    /// `mult1[b][a]`: component `b` of `d_1 o d_a`.
    mult1: JetMat,
    /// Columns `d_1^{o a} = mult1^a d_0`.
    powers: JetMat,
}

impl JetAlgebra {
    fn zero(&self) -> Jet {
        Jet::zero(&self.layout)
    }

    fn constant(&self, c: C64) -> Jet {
        Jet::constant(&self.layout, c)
    }

    fn unit(&self, a: usize) -> JetVec {
        (0..self.n)
            .map(|b| self.constant(real(if a == b { 1.0 } else { 0.0 })))
            .collect()
    }

    fn apply(&self, m: &JetMat, v: &JetVec) -> JetVec {
        (0..self.n)
            .map(|b| (0..self.n).fold(self.zero(), |acc, a| &acc + &(&m[b][a] * &v[a])))
            .collect()
    }

    fn compose(&self, m: &JetMat, k: &JetMat) -> JetMat {
        (0..self.n)
            .map(|b| {
                (0..self.n)
                    .map(|a| (0..self.n).fold(self.zero(), |acc, c| &acc + &(&m[b][c] * &k[c][a])))
                    .collect()
            })
            .collect()
    }

    /// Multiplication operator of `x`, written through the powers of `d_1`.
    fn mult(&self, x: &JetVec) -> Result<JetMat> {
        let y = solve_jets(&self.powers, x)?;
        let mut result: JetMat = (0..self.n)
            .map(|_| (0..self.n).map(|_| self.zero()).collect())
            .collect();
        let mut power: JetMat = (0..self.n).map(|b| self.unit(b)).collect::<Vec<_>>();
        // power is stored by rows; start at the identity.
        power = transpose(&power);
        for ya in y.iter() {
            for b in 0..self.n {
                for a in 0..self.n {
                    result[b][a] = &result[b][a] + &(ya * &power[b][a]);
                }
            }
            power = self.compose(&self.mult1, &power);
        }
        Ok(result)
    }

    fn product(&self, x: &JetVec, y: &JetVec) -> Result<JetVec> {
        Ok(self.apply(&self.mult(x)?, y))
    }
}

fn transpose(m: &JetMat) -> JetMat {
    let n = m.len();
    (0..n)
        .map(|b| (0..n).map(|a| m[a][b].clone()).collect())
        .collect()
}

/// Gaussian elimination over jets with pivoting on the plane values.
fn solve_jets(m: &JetMat, rhs: &JetVec) -> Result<JetVec> {
    let n = rhs.len();
    let mut a: JetMat = m.clone();
    let mut b: JetVec = rhs.clone();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i][col]
                    .value()
                    .norm()
                    .partial_cmp(&a[j][col].value().norm())
                    .unwrap_or(core::cmp::Ordering::Equal)
            })
            .expect("non-empty range");
        if a[pivot][col].value().norm() < 1e-300 {
            return Err(Error::NonInvertible("powers of d_1 do not span".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip()?;
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = &a[row][col] * &inv;
            for k in col..n {
                let t = &factor * &a[col][k];
                a[row][k] = &a[row][k] - &t;
            }
            let t = &factor * &b[col];
            b[row] = &b[row] - &t;
        }
    }
    Ok((0..n)
        .map(|i| &b[i] * &a[i][i].recip().expect("pivot checked"))
        .collect())
}

/// Builds the chart from the multiplication by `d_1` modulo `J^2`.
pub fn perturbative_chart(r: usize, x0: C64, x1: C64, gw: &GwTable) -> Result<PerturbativeChart> {
    if r < 2 || gw.r() as usize != r {
        return Err(Error::InvalidParameter(format!(
            "table is for r = {}, requested r = {r}",
            gw.r()
        )));
    }
    let ru = r as u32;
    if degree_one(gw, &[ru, ru])? != 1.0 {
        return Err(Error::Inconsistent("I(1; r, r) must be 1".into()));
    }
    let n = r + 1;
    let layout = JetLayout::new(r, 1);
    let var = |b: usize| Jet::variable(&layout, b - 1, real(0.0));
    let q1 = Jet::variable(&layout, 0, x1).exp();
    let zero = Jet::zero(&layout);
    let one = Jet::constant(&layout, real(1.0));
    // d_1 o d_a: classical shift plus the degree-one instanton terms.
    let mut mult1: JetMat = vec![vec![zero.clone(); n]; n];
    mult1[1][0] = one.clone();
    for a in 1..=r {
        if a < r {
            mult1[a + 1][a] = one.clone();
        } else {
            mult1[0][r] = &q1 * &Jet::constant(&layout, real(degree_one(gw, &[ru, ru])?));
        }
        for b in 0..=r {
            let c = (r + 1 + b) as i64 - a as i64;
            if !(2..=r as i64).contains(&c) {
                continue;
            }
            let inv = degree_one(gw, &[a as u32, (r - b) as u32, c as u32])?;
            if inv != 1.0 {
                return Err(Error::Inconsistent(format!(
                    "I(1; {a}, {}, {c}) = {inv}, expected 1",
                    r - b
                )));
            }
            let term = &(&q1 * &var(c as usize)) * &Jet::constant(&layout, real(inv));
            mult1[b][a] = &mult1[b][a] + &term;
        }
    }
    let mut powers_cols: Vec<JetVec> = Vec::with_capacity(n + 1);
    let mut current: JetVec = (0..n)
        .map(|b| if b == 0 { one.clone() } else { zero.clone() })
        .collect();
    let algebra_stub = JetAlgebra {
        n,
        layout: layout.clone(),
        mult1: mult1.clone(),
        powers: Vec::new(),
    };
    for _ in 0..=n {
        powers_cols.push(current.clone());
        current = algebra_stub.apply(&mult1, &current);
    }
    let top = powers_cols.pop().expect("n + 1 powers");
    let powers = transpose(&powers_cols);
    let algebra = JetAlgebra {
        n,
        layout: layout.clone(),
        mult1,
        powers,
    };

    // d_1^{o(r+1)} = c (d_0 + N) with N in J; its inverse root is c^{-1/(r+1)} (d_0 - N/(r+1)).
    let c = top[0].clone();
    let ratio = &c * &(-&Jet::variable(&layout, 0, x1)).exp();
    let root = &(-&Jet::variable(&layout, 0, x1))
        .scale(real(1.0 / n as f64))
        .exp()
        * &ratio.powf(-1.0 / n as f64)?;
    let c_inv = c.recip()?;
    let mut q_inv: JetVec = Vec::with_capacity(n);
    for b in 0..n {
        let nb = if b == 0 {
            zero.clone()
        } else {
            &top[b] * &c_inv
        };
        let delta = if b == 0 { one.clone() } else { zero.clone() };
        q_inv.push(&root * &(&delta - &nb.scale(real(1.0 / n as f64))));
    }
    let y = algebra.apply(&algebra.mult1, &q_inv);
    let y_mult = algebra.mult(&y)?;
    let zeta = C64::from_polar(1.0, 2.0 * PI / n as f64);
    let mut y_powers: Vec<JetVec> = Vec::with_capacity(n);
    let mut cur = algebra.unit(0);
    for _ in 0..n {
        y_powers.push(cur.clone());
        cur = algebra.apply(&y_mult, &cur);
    }
    let idempotents: Vec<JetVec> = (0..n)
        .map(|i| {
            (0..n)
                .map(|a| {
                    (0..n).fold(zero.clone(), |acc, j| {
                        let w = zeta.powi(-((i * j) as i32)) / n as f64;
                        &acc + &y_powers[j][a].scale(w)
                    })
                })
                .collect()
        })
        .collect();
    let eta: Vec<Jet> = idempotents.iter().map(|e| e[r].clone()).collect();
    // u^i = g(E, e_i) / eta_i with g_ab = delta_{a + b, r}.
    let euler: JetVec = (0..n)
        .map(|a| match a {
            0 => Jet::constant(&layout, x0),
            1 => Jet::constant(&layout, real(n as f64)),
            _ => var(a).scale(real(1.0 - a as f64)),
        })
        .collect();
    let mut u = Vec::with_capacity(n);
    for i in 0..n {
        let pairing = (0..n).fold(zero.clone(), |acc, a| {
            &acc + &(&euler[a] * &idempotents[i][r - a])
        });
        u.push(&pairing * &eta[i].recip()?);
    }
    // Derivatives along e_k on the plane: d_0 acts only on x0.
    let directional = |f: &Jet, k: usize, d0: C64| -> Result<C64> {
        let mut acc = idempotents[k][0].value() * d0;
        for a in 1..n {
            acc += idempotents[k][a].value() * f.derivative(a - 1)?.value();
        }
        Ok(acc)
    };
    let mut eta_derivatives = linalg::zeros(n);
    let mut u_derivatives = linalg::zeros(n);
    for k in 0..n {
        for i in 0..n {
            eta_derivatives[(k, i)] = directional(&eta[i], k, real(0.0))?;
            u_derivatives[(k, i)] = directional(&u[i], k, real(1.0))?;
        }
    }
    let mut product_residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let prod = algebra.product(&idempotents[i], &idempotents[j])?;
            for a in 0..n {
                let expected = if i == j {
                    idempotents[i][a].value()
                } else {
                    real(0.0)
                };
                product_residual = product_residual.max((prod[a].value() - expected).norm());
            }
        }
    }
    let unity_residual = (0..n)
        .map(|a| {
            let s: C64 = idempotents.iter().map(|e| e[a].value()).sum();
            (s - real(if a == 0 { 1.0 } else { 0.0 })).norm()
        })
        .fold(0.0, f64::max);
    Ok(PerturbativeChart {
        r,
        x0,
        x1,
        idempotents,
        eta,
        u,
        eta_derivatives,
        u_derivatives,
        product_residual,
        unity_residual,
    })
}

impl PerturbativeChart {
    /// Coefficient of `x_b` (`b >= 2`) in a jet.
    pub fn linear_coefficient(f: &Jet, b: usize) -> Result<C64> {
        Ok(f.derivative(b - 1)?.value())
    }
}

/// Deviations between the numeric engine and the closed forms.
#[derive(Clone, Debug)]
pub struct CrossValidation {
    pub r: usize,
    /// `permutation[k]` is the numeric label matched to closed-form label `k`.
    pub permutation: Vec<usize>,
    pub u_deviation: f64,
    pub eta_deviation: f64,
    pub v_deviation: f64,
    pub eta_derivative_deviation: f64,
    /// Special-solution check of the residues built from the numeric chart.
    pub special: SolutionReport,
    pub tol: f64,
}

impl CrossValidation {
    pub fn max_deviation(&self) -> f64 {
        self.u_deviation
            .max(self.eta_deviation)
            .max(self.v_deviation)
            .max(self.eta_derivative_deviation)
    }

    pub fn passed(&self) -> bool {
        self.max_deviation() <= self.tol && self.special.is_special
    }
}

/// Runs the recursion, the numeric split at `(x0, x1, 0, ..., 0)` and compares with the closed forms.
pub fn cross_validate(r: usize, x0: C64, x1: C64, tol: f64) -> Result<CrossValidation> {
    if r < 2 {
        return Err(Error::InvalidParameter(format!(
            "r must be at least 2, got {r}"
        )));
    }
    let table = compute_gw_table(r as u32, 3)?;
    cross_validate_model(&TruncatedPotential::new(table), r, x0, x1, tol)
}

/// Same as [`cross_validate`] for any model claiming to be `QH(P^r)` in flat coordinates.
pub fn cross_validate_model<M: FrobeniusModel + ?Sized>(
    model: &M,
    r: usize,
    x0: C64,
    x1: C64,
    tol: f64,
) -> Result<CrossValidation> {
    let closed = closed_forms(r, x0, x1)?;
    let n = r + 1;
    if model.dim() != n {
        return Err(Error::InvalidModel(format!(
            "model has dimension {}, expected {n}",
            model.dim()
        )));
    }
    let mut x = vec![real(0.0); n];
    x[0] = x0;
    x[1] = x1;
    let point = build_point(model, &x)?;
    let chart = semisimple_split(&point, &SplitOptions::default())?;
    let u_num = chart
        .u
        .clone()
        .ok_or_else(|| Error::InvalidModel("model has no Euler field".into()))?;
    let u_closed = closed.u_vec();
    let permutation = match_labels(&u_closed, &u_num)?;
    let eta_of = |k: usize| chart.eta[permutation[k]];
    let deta = |j: usize, k: usize| chart.eta_derivatives[(permutation[j], permutation[k])];
    let mut u_deviation: f64 = 0.0;
    let mut eta_deviation: f64 = 0.0;
    let mut v_deviation: f64 = 0.0;
    let mut eta_derivative_deviation: f64 = 0.0;
    for k in 0..n {
        u_deviation = u_deviation.max((u_num[permutation[k]] - u_closed[k]).norm());
        eta_deviation = eta_deviation.max((eta_of(k) - closed.eta(k)).norm());
        for j in 0..n {
            if j == k {
                continue;
            }
            let v = (u_closed[k] - u_closed[j]) * deta(j, k) / (eta_of(k) * 2.0);
            let v = if v.re.is_finite() {
                v
            } else {
                real(f64::INFINITY)
            };
            v_deviation = v_deviation.max((v - closed.v(j, k)).norm());
            let expected = closed.eta_derivative(k, j).expect("off-diagonal");
            eta_derivative_deviation = eta_derivative_deviation.max((deta(k, j) - expected).norm());
        }
    }
    // Residues from A_j e_j = -e_j/2 - sum_k (u^k - u^j) eta_jk / (2 eta_k) e_k in the idempotent basis.
    let u_matched: Vec<C64> = (0..n).map(|k| u_num[permutation[k]]).collect();
    let eta_matched: Vec<C64> = (0..n).map(eta_of).collect();
    let residues: Vec<CMat> = (0..n)
        .map(|j| {
            let mut a = linalg::zeros(n);
            for k in 0..n {
                let off = if k == j {
                    real(0.0)
                } else {
                    (u_matched[k] - u_matched[j]) * deta(j, k) / (eta_matched[k] * 2.0)
                };
                a[(k, j)] = -off - if k == j { real(0.5) } else { real(0.0) };
            }
            a
        })
        .collect();
    let mut system = SchlesingerSystem::new(u_matched, residues, linalg::diag(&eta_matched))?;
    system.identity = Some(CVec::from_element(n, real(1.0)));
    system.charge = Some(closed.charge());
    system.special = true;
    system.sign = PoleSign::Plus;
    let special = check_solution(
        &system,
        &CheckOptions {
            tol: tol.max(1e-9) * 10.0,
            ..CheckOptions::default()
        },
    );
    Ok(CrossValidation {
        r,
        permutation,
        u_deviation,
        eta_deviation,
        v_deviation,
        eta_derivative_deviation,
        special,
        tol,
    })
}

/// Nearest-value label matching; ambiguous or non-bijective matches are errors.
pub fn match_labels(reference: &[C64], found: &[C64]) -> Result<Vec<usize>> {
    let n = reference.len();
    let mut perm = Vec::with_capacity(n);
    for (k, target) in reference.iter().enumerate() {
        let mut order: Vec<(f64, usize)> = found
            .iter()
            .enumerate()
            .map(|(i, u)| ((u - target).norm(), i))
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
        let best = order[0];
        if let Some(second) = order.get(1) {
            if best.0 * 4.0 >= second.0 {
                return Err(Error::NotTame {
                    gap: second.0,
                    detail: format!("ambiguous match for label {k}"),
                });
            }
        }
        perm.push(best.1);
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
    Ok(perm)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    pub r: usize,
    /// Eigenvalues of `W = -V - 1/2`, sorted by real part.
    pub eigenvalues: Vec<C64>,
    /// `a - (r + 1)/2` for `a = 0..=r`.
    pub expected: Vec<f64>,
    pub deviation: f64,
    pub contains_zero: bool,
    /// `max_j |sum_{k != j} v_jk - r/2|`.
    pub row_sum_deviation: f64,
}

pub fn spectrum_checks(r: usize) -> Result<SpectrumReport> {
    let closed = closed_forms(r, real(0.0), real(0.0))?;
    let n = r + 1;
    let v = closed.v_matrix();
    let w = -v.transpose() - linalg::identity(n) * real(0.5);
    let mut eigenvalues = linalg::eigenvalues(&w)?;
    eigenvalues.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let expected: Vec<f64> = (0..n).map(|a| a as f64 - n as f64 / 2.0).collect();
    let deviation = eigenvalues
        .iter()
        .zip(&expected)
        .map(|(z, e)| (z - e).norm())
        .fold(0.0, f64::max);
    let contains_zero = eigenvalues.iter().any(|z| z.norm() < 1e-9);
    let row_sum_deviation = (0..n)
        .map(|j| {
            ((0..n).filter(|&k| k != j).map(|k| v[(j, k)]).sum::<C64>() - real(r as f64 / 2.0))
                .norm()
        })
        .fold(0.0, f64::max);
    Ok(SpectrumReport {
        r,
        eigenvalues,
        expected,
        deviation,
        contains_zero,
        row_sum_deviation,
    })
}

/// A model with its metric replaced; everything else is delegated.
pub struct MetricOverride<'a, M: FrobeniusModel + ?Sized> {
    pub inner: &'a M,
    pub metric: CMat,
}

impl<M: FrobeniusModel + ?Sized> FrobeniusModel for MetricOverride<'_, M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn metric(&self) -> CMat {
        self.metric.clone()
    }

    fn lowered_structure(&self, x: &[C64]) -> Result<Tensor3> {
        self.inner.lowered_structure(x)
    }

    fn lowered_structure_derivatives(&self, x: &[C64]) -> Result<Vec<Tensor3>> {
        self.inner.lowered_structure_derivatives(x)
    }

    fn euler(&self) -> Option<EulerData> {
        self.inner.euler()
    }

    fn identity_index(&self) -> Option<usize> {
        self.inner.identity_index()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frobenius_geometry::CanonicalChart;
    use crate::schlesinger::schlesinger_rhs;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn closed_form_values() {
        let cf = closed_forms(2, c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        // j - k = 1 mod 3
        assert!((cf.v(1, 0) - c(0.5, -3f64.sqrt() / 6.0)).norm() < 1e-15);
        assert!((cf.v(0, 2) - c(0.5, -3f64.sqrt() / 6.0)).norm() < 1e-15);
        for i in 0..3 {
            assert!((cf.eta(i) - cf.zeta_pow(i as i64) / 3.0).norm() < 1e-15);
        }
        assert!(closed_forms(1, c(0.0, 0.0), c(0.0, 0.0)).is_err());
    }

    #[test]
    fn closed_forms_satisfy_initial_space_equations() {
        for r in 2..=6 {
            for x1 in [-2.0, -1.0, 0.0, 1.0, 2.0] {
                let cf = closed_forms(r, c(0.4, 0.0), c(x1, 0.0)).unwrap();
                let res = cf.init_data().residuals();
                let scale = cf.eta_vec().iter().fold(0.0f64, |a, e| a.max(e.norm()));
                assert!(res.eta_sum < 1e-12 * scale.max(1.0));
                assert!(res.skew < 1e-12 * scale.max(1.0), "r={r} x1={x1}: {res:?}");
                assert!(res.column_sums < 1e-12, "r={r}: {res:?}");
            }
        }
    }

    #[test]
    fn closed_form_symmetries() {
        let cf = closed_forms(4, c(0.2, 0.1), c(-0.3, 0.4)).unwrap();
        let shifted = closed_forms(4, c(1.2, 0.1), c(-0.3, 0.4)).unwrap();
        for i in 0..5 {
            assert_eq!(shifted.u(i) - cf.u(i), c(1.0, 0.0));
            for k in 0..5 {
                if i != k {
                    assert!(
                        (cf.eta_derivative(k, i).unwrap() - cf.eta_derivative(i, k).unwrap())
                            .norm()
                            < 1e-15
                    );
                }
            }
        }
    }

    #[test]
    fn perturbative_chart_on_the_plane() {
        for r in 2..=4usize {
            let table = compute_gw_table(r as u32, 1).unwrap();
            let (x0, x1) = (c(0.3, 0.0), c(-0.7, 0.0));
            let chart = perturbative_chart(r, x0, x1, &table).unwrap();
            let cf = closed_forms(r, x0, x1).unwrap();
            assert!(
                chart.product_residual < 1e-10,
                "r={r}: {}",
                chart.product_residual
            );
            assert!(chart.unity_residual < 1e-12);
            for i in 0..=r {
                assert!(
                    (chart.eta[i].value() - cf.eta(i)).norm() < 1e-12,
                    "r={r} eta_{i}"
                );
                assert!((chart.u[i].value() - cf.u(i)).norm() < 1e-12, "r={r} u_{i}");
                for k in 0..=r {
                    let expected = if i == k { c(1.0, 0.0) } else { c(0.0, 0.0) };
                    assert!((chart.u_derivatives[(i, k)] - expected).norm() < 1e-8);
                    if let Some(d) = cf.eta_derivative(k, i) {
                        assert!(
                            (chart.eta_derivatives[(k, i)] - d).norm() < 1e-12,
                            "r={r} eta_{k}{i}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn perturbative_linear_terms() {
        // x_b coefficients of eta_i and u^i in the first-order expansions.
        let r = 3usize;
        let n = (r + 1) as f64;
        let table = compute_gw_table(r as u32, 1).unwrap();
        let x1 = c(0.25, 0.0);
        let chart = perturbative_chart(r, c(0.0, 0.0), x1, &table).unwrap();
        let cf = closed_forms(r, c(0.0, 0.0), x1).unwrap();
        for i in 0..=r {
            for b in 2..=r {
                let zib = cf.zeta_pow((i * b) as i64);
                let eta_b = -zib / (n * n)
                    * (b * (r + 1 - b)) as f64
                    * (-x1 * ((r + 1 - b) as f64 / n)).exp();
                let got = PerturbativeChart::linear_coefficient(&chart.eta[i], b).unwrap();
                assert!(
                    (got - eta_b).norm() < 1e-12,
                    "eta_{i} x_{b}: {got} vs {eta_b}"
                );
                let u_b = zib * (x1 * (b as f64 / n)).exp();
                let got = PerturbativeChart::linear_coefficient(&chart.u[i], b).unwrap();
                assert!((got - u_b).norm() < 1e-12, "u_{i} x_{b}: {got} vs {u_b}");
            }
        }
    }

    #[test]
    fn cross_validation_matches_closed_forms() {
        for r in 2..=4 {
            let rep = cross_validate(r, c(0.3, 0.0), c(-0.7, 0.0), 1e-8).unwrap();
            assert!(rep.passed(), "r={r}: {rep:?}");
        }
    }

    #[test]
    fn wrong_metric_is_flagged() {
        let table = compute_gw_table(2, 3).unwrap();
        let model = TruncatedPotential::new(table);
        let wrong = MetricOverride {
            inner: &model,
            metric: linalg::identity(3),
        };
        let flagged = match cross_validate_model(&wrong, 2, c(0.3, 0.0), c(-0.7, 0.0), 1e-8) {
            Ok(rep) => !rep.passed(),
            Err(_) => true,
        };
        assert!(flagged);
    }

    #[test]
    fn spectra_of_w() {
        let two = spectrum_checks(2).unwrap();
        assert!(two.deviation < 1e-10 && !two.contains_zero);
        assert_eq!(two.expected, vec![-1.5, -0.5, 0.5]);
        let three = spectrum_checks(3).unwrap();
        assert!(three.deviation < 1e-10 && three.contains_zero);
        for r in 2..=8 {
            let rep = spectrum_checks(r).unwrap();
            assert!(
                rep.row_sum_deviation < 1e-12 && rep.deviation < 1e-10,
                "r={r}"
            );
            assert_eq!(rep.contains_zero, r % 2 == 1, "r={r}");
        }
    }

    /// Residues of the second structure connection along `QH(P^2)` follow the
    /// flow of `d + sum A_j dlog(lambda - u^j)`.
    #[test]
    fn frobenius_residues_follow_plus_sign() {
        let model = TruncatedPotential::new(compute_gw_table(2, 3).unwrap());
        let opts = SplitOptions::default();
        let x0 = [c(0.1, 0.0), c(-0.3, 0.0), c(0.0, 0.0)];
        let base = semisimple_split(&build_point(&model, &x0).unwrap(), &opts).unwrap();
        let residues_at = |x: &[C64]| -> (Vec<C64>, Vec<CMat>, CanonicalChart) {
            let p = build_point(&model, x).unwrap();
            let chart = semisimple_split(&p, &opts)
                .unwrap()
                .aligned_to(&base)
                .unwrap();
            let shifted = p.euler.as_ref().unwrap().v_flat() + linalg::identity(3) * real(0.5);
            let a = (0..3)
                .map(|j| -(&shifted * p.mult_by(&chart.idempotents.column(j).into_owned())))
                .collect();
            (chart.u.clone().unwrap(), a, chart)
        };
        let h = 1e-5;
        let mut xp = x0.to_vec();
        xp[1] += h;
        let mut xm = x0.to_vec();
        xm[1] -= h;
        let (up, ap, _) = residues_at(&xp);
        let (um, am, _) = residues_at(&xm);
        let (u, a, _) = residues_at(&x0);
        let du: Vec<C64> = up
            .iter()
            .zip(&um)
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect();
        let mut s = SchlesingerSystem::new(u, a, linalg::identity(3)).unwrap();
        s.sign = PoleSign::Plus;
        let rhs = schlesinger_rhs(&s, &du).unwrap();
        for j in 0..3 {
            let fd = (&ap[j] - &am[j]) / real(2.0 * h);
            assert!(linalg::max_abs(&(&fd - &rhs[j])) < 1e-8);
            assert!(linalg::max_abs(&(&fd + &rhs[j])) > 1e-2);
        }
    }
}
