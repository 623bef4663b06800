//! Schlesinger systems: the flow of residue matrices `A_j(u)` under moving
//! poles, special initial data, tau functions and reconstruction of the
//! Frobenius metric.

use crate::linalg::{self, CMat, CVec};
use crate::numeric::central_richardson;
use crate::ode::{self, OdeOptions, OdeStats};
use crate::{Error, Result, C64};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// How residues enter the connection, which fixes the sign of the flow.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PoleSign {
    /// `nabla = d - sum A_j dlog(lambda - u^j)`, flowing by
    /// `dA_j = sum_{i != j} [A_i, A_j] dlog(u^i - u^j)`.
    #[default]
    Minus,
    /// `nabla = d + sum A_j dlog(lambda - u^j)`, flowing by the same equation
    /// with the opposite sign. Residues of the second structure connection
    /// of a Frobenius manifold live here.
    Plus,
}

impl PoleSign {
    pub fn factor(self) -> f64 {
        match self {
            PoleSign::Minus => 1.0,
            PoleSign::Plus => -1.0,
        }
    }
}

/// Residue matrices at positions `u` together with their constant data.
#[derive(Clone, Debug)]
pub struct SchlesingerSystem {
    pub u: Vec<C64>,
    pub residues: Vec<CMat>,
    /// Constant metric on the fibre.
    pub metric: CMat,
    /// `W = sum_j A_j`, fixed at construction.
    pub w: CMat,
    pub identity: Option<CVec>,
    /// Weight `D` of the identity, when known.
    pub charge: Option<f64>,
    pub special: bool,
    /// `Some(true)` once strictness has been established.
    pub strict: Option<bool>,
    pub sign: PoleSign,
}

impl SchlesingerSystem {
    pub fn new(u: Vec<C64>, residues: Vec<CMat>, metric: CMat) -> Result<Self> {
        if u.len() != residues.len() || u.is_empty() {
            return Err(Error::InvalidData(format!(
                "{} positions for {} residues",
                u.len(),
                residues.len()
            )));
        }
        let n = metric.nrows();
        if metric.ncols() != n || residues.iter().any(|a| a.nrows() != n || a.ncols() != n) {
            return Err(Error::InvalidData(
                "residues and metric must be square of equal size".into(),
            ));
        }
        check_distinct(&u, 0.0)?;
        let w = residues.iter().fold(linalg::zeros(n), |acc, a| acc + a);
        Ok(SchlesingerSystem {
            u,
            residues,
            metric,
            w,
            identity: None,
            charge: None,
            special: false,
            strict: None,
            sign: PoleSign::Minus,
        })
    }

    pub fn m(&self) -> usize {
        self.u.len()
    }

    pub fn dim(&self) -> usize {
        self.metric.nrows()
    }

    /// `V = -W - 1/2`.
    pub fn v(&self) -> CMat {
        -&self.w - linalg::identity(self.dim()) * real(0.5)
    }

    pub fn min_gap(&self) -> f64 {
        min_gap(&self.u)
    }

    /// Orthogonal projectors onto `T_j`, the intersection of the kernels of all `A_i`, `i != j`.
    pub fn projectors(&self) -> Result<Vec<CMat>> {
        Ok(kernel_projectors(&self.residues, &self.metric)?.0)
    }

    pub fn conservation_defect(&self) -> f64 {
        let sum = self
            .residues
            .iter()
            .fold(linalg::zeros(self.dim()), |acc, a| acc + a);
        linalg::max_abs(&(sum - &self.w))
    }

    fn with_state(&self, u: Vec<C64>, state: &[C64]) -> SchlesingerSystem {
        SchlesingerSystem {
            u,
            residues: unpack(state, self.m(), self.dim()),
            ..self.clone()
        }
    }
}

pub fn min_gap(u: &[C64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            gap = gap.min((u[i] - u[j]).norm());
        }
    }
    gap
}

fn check_distinct(u: &[C64], guard: f64) -> Result<()> {
    let floor = guard.max(1e-12 * u.iter().fold(1.0f64, |acc, z| acc.max(z.norm())));
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            let distance = (u[i] - u[j]).norm();
            if distance < floor {
                return Err(Error::PoleProximity { i, j, distance });
            }
        }
    }
    Ok(())
}

fn rhs_matrices(
    u: &[C64],
    residues: &[CMat],
    direction: &[C64],
    guard: f64,
    sign: PoleSign,
) -> Result<Vec<CMat>> {
    check_distinct(u, guard)?;
    let sigma = real(sign.factor());
    let m = u.len();
    let n = residues[0].nrows();
    let mut out = vec![linalg::zeros(n); m];
    for j in 0..m {
        for i in 0..m {
            if i == j {
                continue;
            }
            let factor = sigma * (direction[i] - direction[j]) / (u[i] - u[j]);
            if factor != czero() {
                out[j] += linalg::commutator(&residues[i], &residues[j]) * factor;
            }
        }
    }
    Ok(out)
}

/// `dA_j = sum_{i != j} [A_i, A_j] (du^i - du^j) / (u^i - u^j)` along `direction`,
/// negated for [`PoleSign::Plus`].
pub fn schlesinger_rhs(s: &SchlesingerSystem, direction: &[C64]) -> Result<Vec<CMat>> {
    if direction.len() != s.m() {
        return Err(Error::InvalidParameter(format!(
            "direction has {} entries, expected {}",
            direction.len(),
            s.m()
        )));
    }
    rhs_matrices(&s.u, &s.residues, direction, 0.0, s.sign)
}

/// The one-form `sum_{i<j} Tr(A_i A_j) d(u^i - u^j) / (u^i - u^j)` along `direction`.
pub fn tau_form(u: &[C64], residues: &[CMat], direction: &[C64]) -> C64 {
    let mut acc = czero();
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            let du = direction[i] - direction[j];
            if du != czero() {
                acc += (&residues[i] * &residues[j]).trace() * du / (u[i] - u[j]);
            }
        }
    }
    acc
}

fn pack(residues: &[CMat]) -> Vec<C64> {
    residues.iter().flat_map(|a| a.iter().copied()).collect()
}

fn unpack(state: &[C64], m: usize, n: usize) -> Vec<CMat> {
    (0..m)
        .map(|j| CMat::from_column_slice(n, n, &state[j * n * n..(j + 1) * n * n]))
        .collect()
}

/// Piecewise-linear path of pole positions.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationPath {
    pub waypoints: Vec<Vec<C64>>,
}

impl IntegrationPath {
    pub fn new(waypoints: Vec<Vec<C64>>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidData(
                "a path needs at least two waypoints".into(),
            ));
        }
        let m = waypoints[0].len();
        if waypoints.iter().any(|w| w.len() != m) {
            return Err(Error::InvalidData(
                "waypoints have different lengths".into(),
            ));
        }
        Ok(IntegrationPath { waypoints })
    }

    pub fn straight(from: &[C64], to: &[C64]) -> Self {
        IntegrationPath {
            waypoints: vec![from.to_vec(), to.to_vec()],
        }
    }

    /// Polygon with `vertices` corners approximating a circle of `radius`
    /// traced by pole `index` around its position in `base`.
    pub fn circle(base: &[C64], index: usize, radius: f64, vertices: usize) -> Self {
        let waypoints = (0..=vertices)
            .map(|k| {
                let angle = 2.0 * core::f64::consts::PI * (k % vertices) as f64 / vertices as f64;
                let mut p = base.to_vec();
                p[index] += C64::from_polar(radius, angle) - radius;
                p
            })
            .collect();
        IntegrationPath { waypoints }
    }

    pub fn segments(&self) -> usize {
        self.waypoints.len() - 1
    }

    /// Smallest distance between two poles along the path.
    pub fn min_separation(&self) -> (f64, usize, usize) {
        let m = self.waypoints[0].len();
        let mut best = (f64::INFINITY, 0, 0);
        for seg in self.waypoints.windows(2) {
            for i in 0..m {
                for j in i + 1..m {
                    let a = seg[0][i] - seg[0][j];
                    let b = (seg[1][i] - seg[1][j]) - a;
                    let t = if b.norm_sqr() == 0.0 {
                        0.0
                    } else {
                        (-(a * b.conj()).re / b.norm_sqr()).clamp(0.0, 1.0)
                    };
                    let d = (a + b * t).norm();
                    if d < best.0 {
                        best = (d, i, j);
                    }
                }
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationOptions {
    pub ode: OdeOptions,
    /// Abort threshold for the monitors.
    pub monitor_tol: f64,
    /// Minimal allowed pole separation; defaults to `1e-3` times the initial minimal gap.
    pub guard_band: Option<f64>,
    pub record: bool,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            ode: OdeOptions::default(),
            monitor_tol: 1e-8,
            guard_band: None,
            record: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monitors {
    /// `max |sum_j A_j - W|`.
    pub conservation: f64,
    /// Largest second singular value among the `A_j` (special systems only).
    pub rank_defect: Option<f64>,
    /// Largest `|A_j^2 + A_j / 2|` (special systems only).
    pub idempotency: Option<f64>,
}

impl Monitors {
    pub fn max(&self) -> f64 {
        self.conservation
            .max(self.rank_defect.unwrap_or(0.0))
            .max(self.idempotency.unwrap_or(0.0))
    }
}

pub fn monitors(s: &SchlesingerSystem) -> Monitors {
    let conservation = s.conservation_defect();
    if !s.special {
        return Monitors {
            conservation,
            rank_defect: None,
            idempotency: None,
        };
    }
    let mut rank: f64 = 0.0;
    let mut idem: f64 = 0.0;
    for a in &s.residues {
        let sv = linalg::singular_values(a);
        rank = rank.max(sv.get(1).copied().unwrap_or(0.0));
        idem = idem.max(linalg::max_abs(&(a * a + a * real(0.5))));
    }
    Monitors {
        conservation,
        rank_defect: Some(rank),
        idempotency: Some(idem),
    }
}

/// One accepted step; `t` runs from `k` to `k + 1` along segment `k`.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub u: Vec<C64>,
    pub residues: Vec<CMat>,
    pub log_tau: C64,
    pub monitors: Monitors,
}

#[derive(Clone, Debug)]
pub struct IntegrationOutcome {
    pub system: SchlesingerSystem,
    pub trajectory: Vec<TrajectoryRecord>,
    /// Integral of the tau form along the path.
    pub log_tau: C64,
    pub stats: OdeStats,
}

/// Integrates the Schlesinger flow along `path`, co-integrating `log tau`.
pub fn integrate(
    s: &SchlesingerSystem,
    path: &IntegrationPath,
    opts: &IntegrationOptions,
) -> Result<IntegrationOutcome> {
    let m = s.m();
    let n = s.dim();
    if path.waypoints[0].len() != m {
        return Err(Error::InvalidData(format!(
            "path has {} poles, system has {m}",
            path.waypoints[0].len()
        )));
    }
    let scale = s.u.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
    if crate::numeric::max_abs_diff(&path.waypoints[0], &s.u) > 1e-12 * scale {
        return Err(Error::InvalidData(
            "path does not start at the current positions".into(),
        ));
    }
    let guard = opts.guard_band.unwrap_or(1e-3 * s.min_gap());
    let (sep, i, j) = path.min_separation();
    if sep < guard {
        return Err(Error::PoleProximity {
            i,
            j,
            distance: sep,
        });
    }
    let mut state = pack(&s.residues);
    state.push(czero());
    let mut trajectory = Vec::new();
    let mut stats = OdeStats::default();
    if opts.record {
        trajectory.push(TrajectoryRecord {
            t: 0.0,
            u: s.u.clone(),
            residues: s.residues.clone(),
            log_tau: czero(),
            monitors: monitors(s),
        });
    }
    for (k, seg) in path.waypoints.windows(2).enumerate() {
        let start = &seg[0];
        let delta: Vec<C64> = seg[1].iter().zip(start).map(|(b, a)| b - a).collect();
        let at =
            |t: f64| -> Vec<C64> { start.iter().zip(&delta).map(|(a, d)| a + d * t).collect() };
        let rhs = |t: f64, y: &[C64]| -> Result<Vec<C64>> {
            let u = at(t);
            let residues = unpack(y, m, n);
            let d = rhs_matrices(&u, &residues, &delta, guard, s.sign)?;
            let mut out = pack(&d);
            out.push(tau_form(&u, &residues, &delta));
            Ok(out)
        };
        let observer = |t: f64, y: &[C64]| -> Result<()> {
            let current = s.with_state(at(t), &y[..m * n * n]);
            let mon = monitors(&current);
            if mon.max() > opts.monitor_tol {
                let (name, value) = [
                    ("conservation", Some(mon.conservation)),
                    ("rank", mon.rank_defect),
                    ("idempotency", mon.idempotency),
                ]
                .iter()
                .filter_map(|(n, v)| v.map(|v| (*n, v)))
                .fold(("conservation", 0.0), |best, cur| {
                    if cur.1 > best.1 {
                        cur
                    } else {
                        best
                    }
                });
                return Err(Error::MonitorBreach {
                    t: k as f64 + t,
                    monitor: String::from(name),
                    value,
                });
            }
            if opts.record {
                trajectory.push(TrajectoryRecord {
                    t: k as f64 + t,
                    u: current.u,
                    residues: current.residues,
                    log_tau: y[m * n * n],
                    monitors: mon,
                });
            }
            Ok(())
        };
        let (next, seg_stats) =
            ode::integrate(rhs, state, 0.0, 1.0, &opts.ode, observer).map_err(|e| match e {
                Error::StepUnderflow { t, step, norm } => Error::StepUnderflow {
                    t: k as f64 + t,
                    step,
                    norm,
                },
                other => other,
            })?;
        state = next;
        stats.accepted += seg_stats.accepted;
        stats.rejected += seg_stats.rejected;
        stats.evaluations += seg_stats.evaluations;
    }
    let end = path.waypoints.last().expect("non-empty path").clone();
    let log_tau = state[m * n * n];
    let system = s.with_state(end, &state[..m * n * n]);
    Ok(IntegrationOutcome {
        system,
        trajectory,
        log_tau,
        stats,
    })
}

/// Free data parametrising special initial conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecialInitData {
    /// Weight `D`.
    pub charge: f64,
    pub eta: Vec<C64>,
    /// `v[(i, j)] = v_ij`, the coefficient of `e_j` in `V(e_i)`.
    pub v: CMat,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitResiduals {
    /// `|sum eta_i|`.
    pub eta_sum: f64,
    /// `min |eta_i|`.
    pub eta_min: f64,
    /// `max |v_ij eta_j + v_ji eta_i|`.
    pub skew: f64,
    /// `max_j |sum_i v_ij - (1 - D/2)|`.
    pub column_sums: f64,
}

impl SpecialInitData {
    pub fn m(&self) -> usize {
        self.eta.len()
    }

    pub fn residuals(&self) -> InitResiduals {
        let m = self.m();
        let eta_sum = self.eta.iter().sum::<C64>().norm();
        let eta_min = self
            .eta
            .iter()
            .fold(f64::INFINITY, |acc, e| acc.min(e.norm()));
        let mut skew: f64 = 0.0;
        let mut column_sums: f64 = 0.0;
        let target = real(1.0 - self.charge / 2.0);
        for j in 0..m {
            let mut sum = czero();
            for i in 0..m {
                skew =
                    skew.max((self.v[(i, j)] * self.eta[j] + self.v[(j, i)] * self.eta[i]).norm());
                sum += self.v[(i, j)];
            }
            column_sums = column_sums.max((sum - target).norm());
        }
        InitResiduals {
            eta_sum,
            eta_min,
            skew,
            column_sums,
        }
    }

    pub fn validate(&self, tol: f64) -> Result<InitResiduals> {
        let m = self.m();
        if self.v.nrows() != m || self.v.ncols() != m {
            return Err(Error::InvalidData(format!("v must be {m} x {m}")));
        }
        let r = self.residuals();
        let scale = self
            .eta
            .iter()
            .fold(0.0f64, |acc, e| acc.max(e.norm()))
            .max(1e-300);
        if r.eta_min <= tol * scale {
            return Err(Error::InvalidData("some eta_i vanishes".into()));
        }
        if r.eta_sum > tol * scale {
            return Err(Error::InvalidData(format!(
                "sum of eta is {:e}, not zero",
                r.eta_sum
            )));
        }
        let vscale = 1.0 + linalg::max_abs(&self.v);
        if r.skew > tol * scale * vscale {
            return Err(Error::InvalidData(format!(
                "v is not skew for the metric ({:e})",
                r.skew
            )));
        }
        if r.column_sums > tol * vscale {
            return Err(Error::InvalidData(format!(
                "column sums differ from 1 - D/2 by {:e}",
                r.column_sums
            )));
        }
        Ok(r)
    }
}

/// Solves for `v` given `eta`, `D` and the free skew entries `w_ij = v_ij eta_j`
/// for `i < j <= m - 1` (row-major order).
pub fn sample_initial_space(
    m: usize,
    charge: f64,
    eta: &[C64],
    upper_w: &[C64],
) -> Result<SpecialInitData> {
    if eta.len() != m || m < 2 {
        return Err(Error::InvalidParameter(format!(
            "need m >= 2 values of eta, got {} for m = {m}",
            eta.len()
        )));
    }
    let free = (m - 1) * (m - 2) / 2;
    if upper_w.len() != free {
        return Err(Error::InvalidParameter(format!(
            "expected {free} free entries, got {}",
            upper_w.len()
        )));
    }
    let scale = eta.iter().fold(0.0f64, |acc, e| acc.max(e.norm()));
    if eta.iter().any(|e| e.norm() <= 1e-14 * scale) || scale == 0.0 {
        return Err(Error::InvalidData("some eta_i vanishes".into()));
    }
    if eta.iter().sum::<C64>().norm() > 1e-12 * scale {
        return Err(Error::InvalidData("eta must sum to zero".into()));
    }
    let c = real(1.0 - charge / 2.0);
    let mut w = linalg::zeros(m);
    let mut it = upper_w.iter();
    for i in 0..m - 1 {
        for j in i + 1..m - 1 {
            let x = *it.next().expect("length checked");
            w[(i, j)] = x;
            w[(j, i)] = -x;
        }
    }
    let last = m - 1;
    for k in 0..last {
        let partial: C64 = (0..last).map(|i| w[(i, k)]).sum();
        w[(last, k)] = eta[k] * c - partial;
        w[(k, last)] = -w[(last, k)];
    }
    let column: C64 = (0..m).map(|i| w[(i, last)]).sum();
    if (column - eta[last] * c).norm() > 1e-10 * (1.0 + scale) {
        return Err(Error::Inconsistent("last column sum does not close".into()));
    }
    let v = CMat::from_fn(m, m, |i, j| w[(i, j)] / eta[j]);
    Ok(SpecialInitData {
        charge,
        eta: eta.to_vec(),
        v,
    })
}

/// `A_j = -(V + 1/2) P_j` with `P_j` the coordinate projectors and `g = diag(eta)`.
pub fn build_special(init: &SpecialInitData, u: &[C64]) -> Result<SchlesingerSystem> {
    init.validate(1e-9)?;
    let m = init.m();
    if u.len() != m {
        return Err(Error::InvalidData(format!(
            "{} positions for m = {m}",
            u.len()
        )));
    }
    let v_op = init.v.transpose();
    let shifted = &v_op + linalg::identity(m) * real(0.5);
    let residues: Vec<CMat> = (0..m)
        .map(|j| {
            let mut p = linalg::zeros(m);
            p[(j, j)] = real(1.0);
            -(&shifted * p)
        })
        .collect();
    let mut s = SchlesingerSystem::new(u.to_vec(), residues, linalg::diag(&init.eta))?;
    s.identity = Some(CVec::from_element(m, real(1.0)));
    s.charge = Some(init.charge);
    s.special = true;
    s.sign = PoleSign::Plus;
    s.strict = if linalg::condition_number(&s.w) < 1e6 {
        Some(true)
    } else {
        None
    };
    Ok(s)
}

/// Projectors from kernels plus the singular-value gap certifying one-dimensionality.
fn kernel_projectors(residues: &[CMat], metric: &CMat) -> Result<(Vec<CMat>, f64)> {
    let m = residues.len();
    let n = metric.nrows();
    let scale = residues
        .iter()
        .fold(1e-300f64, |acc, a| acc.max(linalg::max_abs(a)));
    let mut projectors = Vec::with_capacity(m);
    let mut worst_gap = f64::INFINITY;
    for j in 0..m {
        let others: Vec<&CMat> = (0..m).filter(|&i| i != j).map(|i| &residues[i]).collect();
        let stacked = if others.is_empty() {
            linalg::zeros(n)
        } else {
            CMat::from_fn(others.len() * n, n, |r, c| others[r / n][(r % n, c)])
        };
        let sv = linalg::singular_values(&stacked);
        let smin = sv.get(n - 1).copied().unwrap_or(0.0);
        let second = if n >= 2 {
            sv.get(n - 2).copied().unwrap_or(0.0)
        } else {
            scale
        };
        if smin > 1e-6 * scale {
            return Err(Error::InvalidData(format!(
                "intersection of kernels for {j} is trivial"
            )));
        }
        worst_gap = worst_gap.min(second / scale);
        let (t, _) = linalg::null_vector(&stacked);
        let gt = metric * &t;
        let norm = t.dot(&gt);
        if norm.norm() < 1e-10 * t.norm_squared() * linalg::max_abs(metric) {
            return Err(Error::DegenerateFrame(format!(
                "kernel line {j} is isotropic"
            )));
        }
        projectors.push(&t * gt.transpose() / norm);
    }
    Ok((projectors, worst_gap))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrictMethod {
    /// `W` is invertible.
    InvertibleW,
    /// Finite differences of the projectors along coordinate directions.
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionReport {
    pub is_special: bool,
    pub is_strict_special: bool,
    pub strict_method: Option<StrictMethod>,
    /// Residual of the projector equation when checked by finite differences.
    pub strict_residual: Option<f64>,
    /// `D` such that `V e = (1 - D/2) e`, when the stored identity qualifies.
    pub identity_weight: Option<f64>,
    /// Smallest second singular value of the stacked kernels (relative); large means one-dimensional.
    pub kernel_gap: f64,
    pub orthogonality: f64,
    /// `max |A_j - W P_j|`.
    pub w_projection: f64,
    pub min_residue_norm: f64,
    pub detail: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckOptions {
    pub tol: f64,
    pub integration: IntegrationOptions,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            tol: 1e-7,
            integration: IntegrationOptions {
                record: false,
                ..IntegrationOptions::default()
            },
        }
    }
}

/// Classifies a solution: special, strictly special, identity weight.
pub fn check_solution(s: &SchlesingerSystem, opts: &CheckOptions) -> SolutionReport {
    let mut report = SolutionReport {
        is_special: false,
        is_strict_special: false,
        strict_method: None,
        strict_residual: None,
        identity_weight: None,
        kernel_gap: 0.0,
        orthogonality: f64::INFINITY,
        w_projection: f64::INFINITY,
        min_residue_norm: s
            .residues
            .iter()
            .fold(f64::INFINITY, |acc, a| acc.min(linalg::max_abs(a))),
        detail: None,
    };
    let scale = s
        .residues
        .iter()
        .fold(1e-300f64, |acc, a| acc.max(linalg::max_abs(a)));
    let projectors = match kernel_projectors(&s.residues, &s.metric) {
        Ok((p, gap)) => {
            report.kernel_gap = gap;
            p
        }
        Err(e) => {
            report.detail = Some(format!("{e}"));
            return report;
        }
    };
    let mut orth: f64 = 0.0;
    let mut wp: f64 = 0.0;
    let gscale = linalg::max_abs(&s.metric);
    for (j, pj) in projectors.iter().enumerate() {
        wp = wp.max(linalg::max_abs(&(&s.residues[j] - &s.w * pj)));
        for pk in projectors.iter().skip(j + 1) {
            orth = orth.max(linalg::max_abs(&(pj.transpose() * &s.metric * pk)) / gscale);
        }
    }
    report.orthogonality = orth;
    report.w_projection = wp;
    report.is_special = report.kernel_gap > opts.tol
        && orth < opts.tol
        && wp < opts.tol * scale
        && report.min_residue_norm > opts.tol * scale;
    if !report.is_special {
        report.detail = Some("kernel, orthogonality or projection test failed".into());
        return report;
    }
    if let Some(e) = &s.identity {
        let ve = s.v() * e;
        let lambda = e.dotc(&ve) / e.dotc(e);
        let eigen = (&ve - e * lambda).norm() <= opts.tol * (1.0 + ve.norm());
        let nonzero = projectors
            .iter()
            .all(|p| (p * e).norm() > opts.tol * e.norm());
        if eigen && nonzero && lambda.im.abs() <= opts.tol {
            report.identity_weight = Some(2.0 * (1.0 - lambda.re));
        }
    }
    if linalg::condition_number(&s.w) < 1e6 {
        report.is_strict_special = true;
        report.strict_method = Some(StrictMethod::InvertibleW);
        return report;
    }
    report.strict_method = Some(StrictMethod::FiniteDifference);
    match strict_residual(s, &projectors, opts) {
        Ok(r) => {
            report.strict_residual = Some(r);
            report.is_strict_special = r < opts.tol.max(1e-6);
        }
        Err(e) => report.detail = Some(format!("{e}")),
    }
    report
}

/// `max |dP_j - sum_{i != j} (P_i W P_j - P_j W P_i) d(u^i - u^j)/(u^i - u^j)|` over coordinate
/// directions, with the right side negated for [`PoleSign::Plus`].
fn strict_residual(s: &SchlesingerSystem, projectors: &[CMat], opts: &CheckOptions) -> Result<f64> {
    let m = s.m();
    let n = s.dim();
    let h = 1e-6 * s.min_gap();
    let mut worst: f64 = 0.0;
    for k in 0..m {
        let mut failure = None;
        let dp = central_richardson(
            |t| {
                let mut target = s.u.clone();
                target[k] += t;
                let moved = integrate(
                    s,
                    &IntegrationPath::straight(&s.u, &target),
                    &opts.integration,
                )
                .and_then(|o| o.system.projectors());
                match moved {
                    Ok(ps) => ps.iter().flat_map(|p| p.iter().copied()).collect(),
                    Err(e) => {
                        failure = Some(e);
                        vec![czero(); m * n * n]
                    }
                }
            },
            h,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        for j in 0..m {
            let derivative = CMat::from_column_slice(n, n, &dp[j * n * n..(j + 1) * n * n]);
            let mut expected = linalg::zeros(n);
            for i in 0..m {
                if i == j {
                    continue;
                }
                let du = if i == k { real(1.0) } else { czero() }
                    - if j == k { real(1.0) } else { czero() };
                if du != czero() {
                    let term = &projectors[i] * &s.w * &projectors[j]
                        - &projectors[j] * &s.w * &projectors[i];
                    expected += term * (du * s.sign.factor() / (s.u[i] - s.u[j]));
                }
            }
            worst = worst.max(linalg::max_abs(&(derivative - expected)));
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TauReport {
    pub log_tau: C64,
    pub tau: C64,
    /// Samples `(t, omega(du/dt))` along the path.
    pub omega_samples: Vec<(f64, C64)>,
    /// Largest antisymmetrised mixed partial of the tau form at the start.
    pub closedness: Option<f64>,
}

/// Integrates the tau form along `path` and spot-checks that it is closed at the start.
pub fn tau(
    s: &SchlesingerSystem,
    path: &IntegrationPath,
    opts: &IntegrationOptions,
    check_closed: bool,
) -> Result<TauReport> {
    let record = IntegrationOptions {
        record: true,
        ..*opts
    };
    let outcome = integrate(s, path, &record)?;
    let mut omega_samples = Vec::with_capacity(outcome.trajectory.len());
    for rec in &outcome.trajectory {
        let seg = (rec.t.floor() as usize).min(path.segments() - 1);
        let delta: Vec<C64> = path.waypoints[seg + 1]
            .iter()
            .zip(&path.waypoints[seg])
            .map(|(b, a)| b - a)
            .collect();
        omega_samples.push((rec.t, tau_form(&rec.u, &rec.residues, &delta)));
    }
    let closedness = if check_closed {
        Some(tau_closedness(s, opts)?)
    } else {
        None
    };
    Ok(TauReport {
        log_tau: outcome.log_tau,
        tau: outcome.log_tau.exp(),
        omega_samples,
        closedness,
    })
}

/// `max |d_k omega_l - d_l omega_k|` at the current point by central differences.
pub fn tau_closedness(s: &SchlesingerSystem, opts: &IntegrationOptions) -> Result<f64> {
    let m = s.m();
    let h = 1e-3 * s.min_gap();
    let quiet = IntegrationOptions {
        record: false,
        ..*opts
    };
    // partials[k][l] = d_k omega_l
    let mut partials = vec![vec![czero(); m]; m];
    for k in 0..m {
        let mut failure = None;
        let values = central_richardson(
            |t| {
                let mut target = s.u.clone();
                target[k] += t;
                match integrate(s, &IntegrationPath::straight(&s.u, &target), &quiet) {
                    Ok(o) => (0..m)
                        .map(|l| {
                            let mut e = vec![czero(); m];
                            e[l] = real(1.0);
                            tau_form(&o.system.u, &o.system.residues, &e)
                        })
                        .collect(),
                    Err(e) => {
                        failure = Some(e);
                        vec![czero(); m]
                    }
                }
            },
            h,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        partials[k] = values;
    }
    let mut worst: f64 = 0.0;
    for k in 0..m {
        for l in k + 1..m {
            worst = worst.max((partials[k][l] - partials[l][k]).norm());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    /// Shift `t` applied to `A_j + t P_j`.
    pub shift: f64,
    pub eta: Vec<C64>,
    /// `max |e_i eta_j - e_j eta_i|`.
    pub symmetry: f64,
    /// `max |E eta_j - (D - 2) eta_j|` with `E = sum u^i e_i`.
    pub euler: f64,
    /// Scale of the derivatives, for relative comparisons.
    pub derivative_scale: f64,
}

/// Picks the shift `t` for reconstruction: zero when `D != 1` and `W` is well
/// conditioned, otherwise the first of `1, -1, 2, -2, ...` that makes both
/// `W + t` well conditioned and `(1 - D)/2 + t` nonzero.
pub fn reconstruction_shift(w: &CMat, charge: f64) -> Result<f64> {
    let n = w.nrows();
    let ok = |t: f64| {
        (0.5 * (1.0 - charge) + t).abs() > 1e-9
            && linalg::condition_number(&(w + linalg::identity(n) * real(t))) < 1e6
    };
    if ok(0.0) {
        return Ok(0.0);
    }
    for k in 1..=16 {
        for t in [k as f64, -(k as f64)] {
            if ok(t) {
                return Ok(t);
            }
        }
    }
    Err(Error::DegenerateWeight("no admissible shift found".into()))
}

fn reconstructed_eta(s: &SchlesingerSystem, e: &CVec, charge: f64, shift: f64) -> Result<Vec<C64>> {
    let denom = 0.5 * (1.0 - charge) + shift;
    if denom.abs() < 1e-12 {
        return Err(Error::DegenerateWeight(format!(
            "(1 - D)/2 + t vanishes for D = {charge}, t = {shift}"
        )));
    }
    let projectors = if shift != 0.0 {
        Some(s.projectors()?)
    } else {
        None
    };
    Ok((0..s.m())
        .map(|j| {
            let mut a = s.residues[j].clone();
            if let Some(p) = &projectors {
                a += &p[j] * real(shift);
            }
            e.dot(&(&s.metric * (a * e))) / denom
        })
        .collect())
}

/// Recovers `eta_j = g(e, A_j e) / ((1 - D)/2 + t)` and checks that it is a
/// potential metric of weight `D - 2` by finite differences along the flow.
pub fn reconstruct_frobenius(
    s: &SchlesingerSystem,
    e: &CVec,
    charge: f64,
    shift: Option<f64>,
    opts: &IntegrationOptions,
) -> Result<Reconstruction> {
    let shift = match shift {
        Some(t) => t,
        None => reconstruction_shift(&s.w, charge)?,
    };
    let eta = reconstructed_eta(s, e, charge, shift)?;
    let m = s.m();
    let h = 1e-4 * s.min_gap();
    let quiet = IntegrationOptions {
        record: false,
        ..*opts
    };
    let mut deriv = vec![vec![czero(); m]; m];
    for i in 0..m {
        let mut failure = None;
        let values = central_richardson(
            |t| {
                let mut target = s.u.clone();
                target[i] += t;
                let moved = integrate(s, &IntegrationPath::straight(&s.u, &target), &quiet)
                    .and_then(|o| reconstructed_eta(&o.system, e, charge, shift));
                moved.unwrap_or_else(|err| {
                    failure = Some(err);
                    vec![czero(); m]
                })
            },
            h,
        );
        if let Some(err) = failure {
            return Err(err);
        }
        deriv[i] = values;
    }
    let mut symmetry: f64 = 0.0;
    let mut euler: f64 = 0.0;
    let mut derivative_scale: f64 = 0.0;
    for j in 0..m {
        let mut e_eta = czero();
        for i in 0..m {
            symmetry = symmetry.max((deriv[i][j] - deriv[j][i]).norm());
            derivative_scale = derivative_scale.max(deriv[i][j].norm());
            e_eta += s.u[i] * deriv[i][j];
        }
        euler = euler.max((e_eta - eta[j] * (charge - 2.0)).norm());
    }
    Ok(Reconstruction {
        shift,
        eta,
        symmetry,
        euler,
        derivative_scale,
    })
}
