//! Odd potentials, the Egoroff chart and the residuals of the flatness,
//! identity and Euler conditions.

use super::c64;
use super::tangent::TangentVector;
use crate::grassmann::{Grassmann, Parity, SuperFunction, SuperJet};
use crate::jet::{Jet, JetLayout};
use crate::{Error, Result, C64};
use alloc::boxed::Box;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Coordinates handed to a potential: `u^a`, `theta^a` and odd constants as super jets.
#[derive(Clone, Debug)]
pub struct SuperCoordinates {
    pub generators: usize,
    pub layout: Arc<JetLayout>,
    pub u: Vec<SuperJet>,
    pub theta: Vec<SuperJet>,
    pub constants: Vec<SuperJet>,
    /// The even coordinates as plain jets.
    pub u_jets: Vec<Jet>,
}

impl SuperCoordinates {
    pub fn new(n: usize, constants: usize, u: &[C64], order: usize) -> Self {
        let generators = n + constants;
        let layout = JetLayout::new(n, order);
        let zero = Jet::zero(&layout);
        let u_jets: Vec<Jet> = (0..n).map(|a| Jet::variable(&layout, a, u[a])).collect();
        SuperCoordinates {
            generators,
            u: u_jets
                .iter()
                .map(|j| SuperJet::scalar(generators, j.clone()))
                .collect(),
            theta: (0..n)
                .map(|a| SuperJet::generator(generators, a, &zero))
                .collect(),
            constants: (n..generators)
                .map(|a| SuperJet::generator(generators, a, &zero))
                .collect(),
            layout,
            u_jets,
        }
    }

    pub fn constant(&self, c: C64) -> SuperJet {
        SuperJet::constant_jet(self.generators, &self.layout, c)
    }

    pub fn lift(&self, jet: Jet) -> SuperJet {
        SuperJet::scalar(self.generators, jet)
    }

    pub fn zero(&self) -> SuperJet {
        SuperJet::zero(self.generators, &Jet::zero(&self.layout))
    }
}

/// Coefficient function `f_S(u)` of a single odd monomial.
pub type CoefficientFn = Arc<dyn Fn(&[Jet]) -> Result<Jet> + Send + Sync>;

type PotentialFn = dyn Fn(&SuperCoordinates) -> Result<SuperJet> + Send + Sync;

/// An odd function `Psi(u, theta)` determining an Egoroff metric.
#[derive(Clone)]
pub struct SuperPotential {
    n: usize,
    constants: usize,
    f: Arc<PotentialFn>,
}

impl fmt::Debug for SuperPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SuperPotential")
            .field("n", &self.n)
            .field("constants", &self.constants)
            .finish()
    }
}

impl SuperPotential {
    pub fn new<F>(n: usize, f: F) -> Self
    where
        F: Fn(&SuperCoordinates) -> Result<SuperJet> + Send + Sync + 'static,
    {
        Self::with_constants(n, 0, f)
    }

    /// A potential that may use `constants` odd constants as extra generators.
    pub fn with_constants<F>(n: usize, constants: usize, f: F) -> Self
    where
        F: Fn(&SuperCoordinates) -> Result<SuperJet> + Send + Sync + 'static,
    {
        SuperPotential {
            n,
            constants,
            f: Arc::new(f),
        }
    }

    /// `Psi = sum_S f_S(u) theta^S` over odd subsets `S` given as bitmasks.
    pub fn from_components(n: usize, components: Vec<(u32, CoefficientFn)>) -> Result<Self> {
        for (mask, _) in &components {
            if mask.count_ones() % 2 == 0 {
                return Err(Error::Parity(format!(
                    "monomial {mask:#b} of an odd potential is even"
                )));
            }
            if (*mask as u64) >> n != 0 {
                return Err(Error::InvalidParameter(format!(
                    "monomial {mask:#b} uses more than {n} generators"
                )));
            }
        }
        let components: Box<[(u32, CoefficientFn)]> = components.into_boxed_slice();
        Ok(Self::new(n, move |c: &SuperCoordinates| {
            let mut acc = c.zero();
            for (mask, f) in components.iter() {
                acc = &acc + &Grassmann::monomial(c.generators, *mask, f(&c.u_jets)?);
            }
            Ok(acc)
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn constants(&self) -> usize {
        self.constants
    }

    /// Expansion of `Psi` around `u` with jets of the given order.
    pub fn expand(&self, u: &[C64], order: usize) -> Result<SuperJet> {
        if u.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "point has {} coordinates, expected {}",
                u.len(),
                self.n
            )));
        }
        let coords = SuperCoordinates::new(self.n, self.constants, u, order);
        let psi = (self.f)(&coords)?;
        if psi.generators() != coords.generators {
            return Err(Error::InvalidParameter(
                "potential returned a different generator count".into(),
            ));
        }
        if !psi.is_zero() && psi.parity() != Some(Parity::Odd) {
            return Err(Error::Parity("potential is not odd".into()));
        }
        Ok(psi)
    }
}

impl SuperFunction for SuperPotential {
    fn generators(&self) -> usize {
        self.n + self.constants
    }

    fn parity(&self) -> Parity {
        Parity::Odd
    }

    fn evaluate(&self, u: &[C64], order: usize) -> Result<SuperJet> {
        self.expand(u, order)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChartOptions {
    /// Jet order of the potential; the Euler operator checks need 4.
    pub order: usize,
}

impl Default for ChartOptions {
    fn default() -> Self {
        ChartOptions { order: 4 }
    }
}

/// Everything derived from `Psi` at one point, with `theta` kept symbolic.
#[derive(Clone, Debug)]
pub struct SuperChart {
    pub n: usize,
    pub u: Vec<C64>,
    pub coords: SuperCoordinates,
    pub potential: SuperJet,
    /// `e_a Psi`, even.
    pub eta: Vec<SuperJet>,
    /// `d_a Psi`, odd.
    pub eta_odd: Vec<SuperJet>,
    pub inv_eta: Vec<SuperJet>,
    /// Principal square roots; products of these fix the branch of every `gamma`.
    pub sqrt_eta: Vec<SuperJet>,
    /// `e_eta[m][a] = e_m eta_a`.
    pub e_eta: Vec<Vec<SuperJet>>,
    /// Rotation coefficients `e_a eta_b / (2 sqrt(eta_a) sqrt(eta_b))`, zero on the diagonal.
    pub gamma: Vec<Vec<SuperJet>>,
    /// `levi_civita[m][B]`: covariant derivative along `e_m` of basis vector `B`.
    pub levi_civita: Vec<Vec<TangentVector<Jet>>>,
}

fn half() -> C64 {
    c64(0.5)
}

/// Builds the chart of `psi` at `u`.
pub fn egoroff_chart(psi: &SuperPotential, u: &[C64], opts: &ChartOptions) -> Result<SuperChart> {
    let n = psi.n();
    if opts.order < 3 {
        return Err(Error::JetOrder(
            "the chart needs jets of order at least 3".into(),
        ));
    }
    let potential = psi.expand(u, opts.order)?;
    let coords = SuperCoordinates::new(n, psi.constants(), u, opts.order);
    let mut eta = Vec::with_capacity(n);
    let mut eta_odd = Vec::with_capacity(n);
    for a in 0..n {
        eta.push(potential.susy_derivative(a)?);
        eta_odd.push(potential.even_derivative(a)?);
    }
    for (a, e) in eta.iter().enumerate() {
        if e.body().value().norm() < 1e-300 {
            return Err(Error::DegeneratePotential(format!(
                "body of eta_{a} vanishes at the point"
            )));
        }
    }
    let inv_eta = eta
        .iter()
        .map(|e| e.inverse())
        .collect::<Result<Vec<_>>>()?;
    let sqrt_eta = eta.iter().map(|e| e.sqrt()).collect::<Result<Vec<_>>>()?;
    let mut e_eta = vec![Vec::with_capacity(n); n];
    for (m, row) in e_eta.iter_mut().enumerate() {
        for e in &eta {
            row.push(e.susy_derivative(m)?);
        }
    }
    let zero = coords.zero();
    let mut gamma = vec![vec![zero.clone(); n]; n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                let denom = (&sqrt_eta[a] * &sqrt_eta[b]).inverse()?;
                gamma[a][b] = (&e_eta[a][b] * &denom).scale(half());
            }
        }
    }
    let mut chart = SuperChart {
        n,
        u: u.to_vec(),
        coords,
        potential,
        eta,
        eta_odd,
        inv_eta,
        sqrt_eta,
        e_eta,
        gamma,
        levi_civita: Vec::new(),
    };
    chart.levi_civita = levi_civita(&chart)?;
    Ok(chart)
}

impl SuperChart {
    pub fn generators(&self) -> usize {
        self.coords.generators
    }

    pub fn zero(&self) -> SuperJet {
        self.coords.zero()
    }

    pub fn zero_vector(&self) -> TangentVector<Jet> {
        vec![self.zero(); 2 * self.n]
    }

    /// `x / (2 eta_a)`.
    pub(crate) fn over_two_eta(&self, x: &SuperJet, a: usize) -> SuperJet {
        (x * &self.inv_eta[a]).scale(half())
    }

    /// Coefficient `c[b][a] = e_b eta_a / (2 eta_b)` in `e~_a = d_a - sum_b c[b][a] e_b`.
    pub fn splitting_coefficient(&self, b: usize, a: usize) -> SuperJet {
        self.over_two_eta(&self.e_eta[b][a], b)
    }

    /// The Euler field `sum_a (u^a d_a + theta^a e_a / 2)` applied to `f`.
    pub fn euler_apply(&self, f: &SuperJet) -> Result<SuperJet> {
        let mut acc = self.zero();
        for a in 0..self.n {
            acc = &acc + &(&self.coords.u[a] * &f.even_derivative(a)?);
            acc = &acc + &(&self.coords.theta[a] * &f.susy_derivative(a)?).scale(half());
        }
        Ok(acc)
    }

    /// The connection `nabla~` of the split algebra: `tnabla[m][a][b]` is the
    /// coefficient of `e_b` in `nabla~_{e_m} e_a` (the same on odd and even halves).
    pub fn tnabla_coefficients(&self) -> Vec<Vec<Vec<SuperJet>>> {
        let n = self.n;
        let mut out = vec![vec![vec![self.zero(); n]; n]; n];
        for m in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut c = self.zero();
                    if a == b {
                        c = &c + &self.over_two_eta(&self.e_eta[m][a], a);
                    }
                    if b == m {
                        c = &c - &self.over_two_eta(&self.e_eta[a][m], m);
                    }
                    if m == a {
                        c = &c + &self.over_two_eta(&self.e_eta[b][a], b);
                    }
                    out[m][a][b] = c;
                }
            }
        }
        out
    }
}

/// Covariant derivatives of the Levi-Civita connection of the Egoroff metric along the odd frame.
fn levi_civita(chart: &SuperChart) -> Result<Vec<Vec<TangentVector<Jet>>>> {
    let n = chart.n;
    let one = chart.coords.constant(c64(1.0));
    let mut table = Vec::with_capacity(n);
    for m in 0..n {
        let mut row = Vec::with_capacity(2 * n);
        for a in 0..n {
            let mut v = chart.zero_vector();
            if m == a {
                v[n + a] = one.clone();
            }
            v[a] = &v[a] + &chart.over_two_eta(&chart.e_eta[m][a], a);
            v[m] = &v[m] - &chart.over_two_eta(&chart.e_eta[a][m], m);
            row.push(v);
        }
        for a in 0..n {
            let mut v = chart.zero_vector();
            let ratio = chart.over_two_eta(&chart.eta_odd[a], a);
            v[a] = &v[a] + &ratio.susy_derivative(m)?;
            v[m] = &v[m] + &chart.over_two_eta(&chart.eta[m].even_derivative(a)?, m);
            v[n + a] = &v[n + a] + &chart.over_two_eta(&chart.e_eta[m][a], a);
            if m == a {
                for b in 0..n {
                    let inner = chart.over_two_eta(&chart.e_eta[b][m], b);
                    v[b] = &v[b] - &inner.susy_derivative(b)?;
                    v[n + b] = &v[n + b] + &chart.over_two_eta(&chart.e_eta[b][a], b);
                }
                v[n + a] = &v[n + a] - &(&chart.eta_odd[a] * &chart.inv_eta[a]);
            }
            row.push(v);
        }
        table.push(row);
    }
    Ok(table)
}

/// Equations that [`super_residuals`] can report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SuperEquation {
    DarbouxEgoroff,
    TnablaFlat,
    FlatIdentityE,
    FlatIdentityEps,
    Euler,
    Orthogonality,
}

impl SuperEquation {
    pub const ALL: [SuperEquation; 6] = [
        SuperEquation::DarbouxEgoroff,
        SuperEquation::TnablaFlat,
        SuperEquation::FlatIdentityE,
        SuperEquation::FlatIdentityEps,
        SuperEquation::Euler,
        SuperEquation::Orthogonality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SuperEquation::DarbouxEgoroff => "darboux_egoroff",
            SuperEquation::TnablaFlat => "tnabla_flat",
            SuperEquation::FlatIdentityE => "flat_identity_e",
            SuperEquation::FlatIdentityEps => "flat_identity_eps",
            SuperEquation::Euler => "euler",
            SuperEquation::Orthogonality => "orthogonality",
        }
    }

    pub fn parse(s: &str) -> Option<SuperEquation> {
        Self::ALL.iter().copied().find(|e| e.name() == s)
    }
}

/// Largest coefficient of each residual at the point. `None` marks a vacuous equation.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperResiduals {
    /// `e_m gamma_ab = gamma_ma gamma_mb` for distinct triples; vacuous for `n < 3`.
    pub darboux_egoroff_triples: Option<f64>,
    /// `sum_a d_a gamma_bc = 0`.
    pub darboux_egoroff_identity: f64,
    /// Flatness of `nabla~` beyond the triple equations.
    pub tnabla_flat: f64,
    /// `sum_b d_b eta_a = 0`.
    pub identity_e: f64,
    /// Drift of `sum_a eta_odd_a` along the odd frame.
    pub identity_e_sum: f64,
    /// `(theta^m - theta^a) e_m eta_a = 0`.
    pub identity_eps_cross: f64,
    /// `sum_b d/dtheta^b eta_a = eta_odd_a`.
    pub identity_eps_odd: f64,
    /// Drift of `sum_a eta_a` along the odd frame (flatness of the odd identity).
    pub eps_drift: f64,
    /// `identity_e_sum / eps_drift` when the latter is nonzero.
    pub implication_ratio: Option<f64>,
    /// `E eta_a = (D - 3/2) eta_a`, when `D` is supplied.
    pub euler_eta: Option<f64>,
    /// `E gamma_ab = -gamma_ab / 2`.
    pub euler_gamma: f64,
    /// Least-squares `D` from `E eta = (D - 3/2) eta`.
    pub fitted_charge: Option<C64>,
    /// `|g(e, eps)| = |sum_a eta_a|`.
    pub orthogonality: f64,
    /// `e_m eta_a + e_a eta_m - 2 delta_ma eta_odd_a`, always zero.
    pub anticommutator: f64,
}

impl SuperResiduals {
    /// Largest residual attached to an equation group; `None` when vacuous.
    pub fn get(&self, eq: SuperEquation) -> Option<f64> {
        match eq {
            SuperEquation::DarbouxEgoroff => Some(
                self.darboux_egoroff_triples
                    .unwrap_or(0.0)
                    .max(self.darboux_egoroff_identity),
            ),
            SuperEquation::TnablaFlat => Some(
                self.tnabla_flat
                    .max(self.darboux_egoroff_triples.unwrap_or(0.0)),
            ),
            SuperEquation::FlatIdentityE => Some(self.identity_e.max(self.identity_e_sum)),
            SuperEquation::FlatIdentityEps => {
                Some(self.identity_eps_cross.max(self.identity_eps_odd))
            }
            SuperEquation::Euler => self.euler_eta.map(|e| e.max(self.euler_gamma)),
            SuperEquation::Orthogonality => Some(self.orthogonality),
        }
    }
}

fn point_max(x: &SuperJet) -> f64 {
    x.at_point().max_abs()
}

/// Evaluates every residual at the chart point. `charge` is the weight `D`.
pub fn super_residuals(chart: &SuperChart, charge: Option<C64>) -> Result<SuperResiduals> {
    let n = chart.n;
    let mut triples: Option<f64> = None;
    let mut identity: f64 = 0.0;
    let mut tflat: f64 = 0.0;
    let mut euler_gamma: f64 = 0.0;
    for m in 0..n {
        for a in 0..n {
            if a == m {
                continue;
            }
            let g = &chart.gamma[m][a];
            let mut de = chart.zero();
            for b in 0..n {
                de = &de + &g.even_derivative(b)?;
            }
            identity = identity.max(point_max(&de));
            let mut lhs = chart.zero();
            for b in 0..n {
                if b != m && b != a {
                    lhs = &lhs + &g.susy_derivative(b)?;
                }
            }
            let rhs = &g.susy_derivative(m)? + &g.susy_derivative(a)?;
            tflat = tflat.max(point_max(&(&lhs - &rhs)));
            let eg = &chart.euler_apply(g)? + &g.scale(half());
            euler_gamma = euler_gamma.max(point_max(&eg));
            for b in 0..n {
                if b == m || b == a {
                    continue;
                }
                let r = &chart.gamma[a][b].susy_derivative(m)?
                    - &(&chart.gamma[m][a] * &chart.gamma[m][b]);
                triples = Some(triples.unwrap_or(0.0).max(point_max(&r)));
            }
        }
    }
    let mut identity_e: f64 = 0.0;
    let mut cross: f64 = 0.0;
    let mut odd: f64 = 0.0;
    let mut anticommutator: f64 = 0.0;
    let mut euler_eta: f64 = 0.0;
    let mut fit_num = C64::new(0.0, 0.0);
    let mut fit_den = 0.0;
    let eta_sum = chart.eta.iter().fold(chart.zero(), |acc, e| &acc + e);
    let odd_sum = chart.eta_odd.iter().fold(chart.zero(), |acc, e| &acc + e);
    let mut eps_drift: f64 = 0.0;
    let mut identity_e_sum: f64 = 0.0;
    for a in 0..n {
        let mut s = chart.zero();
        let mut t = chart.zero();
        for b in 0..n {
            s = &s + &chart.eta[a].even_derivative(b)?;
            t = &t + &chart.eta[a].left_derivative(b);
        }
        identity_e = identity_e.max(point_max(&s));
        odd = odd.max(point_max(&(&t - &chart.eta_odd[a])));
        for m in 0..n {
            if m != a {
                let diff = &chart.coords.theta[m] - &chart.coords.theta[a];
                cross = cross.max(point_max(&(&diff * &chart.e_eta[m][a])));
            }
            let mut anti = &chart.e_eta[m][a] + &chart.e_eta[a][m];
            if m == a {
                anti = &anti - &chart.eta_odd[a].scale(c64(2.0));
            }
            anticommutator = anticommutator.max(point_max(&anti));
        }
        let e_eta = chart.euler_apply(&chart.eta[a])?.at_point();
        let eta = chart.eta[a].at_point();
        for (mask, c) in eta.terms() {
            fit_num += c.conj() * e_eta.coefficient(mask);
            fit_den += c.norm_sqr();
        }
        if let Some(d) = charge {
            let r = &chart.euler_apply(&chart.eta[a])? - &chart.eta[a].scale(d - 1.5);
            euler_eta = euler_eta.max(point_max(&r));
        }
        eps_drift = eps_drift.max(point_max(&eta_sum.susy_derivative(a)?));
        identity_e_sum = identity_e_sum.max(point_max(&odd_sum.susy_derivative(a)?));
    }
    Ok(SuperResiduals {
        darboux_egoroff_triples: triples,
        darboux_egoroff_identity: identity,
        tnabla_flat: tflat,
        identity_e,
        identity_e_sum,
        identity_eps_cross: cross,
        identity_eps_odd: odd,
        eps_drift,
        implication_ratio: (eps_drift > 0.0).then(|| identity_e_sum / eps_drift),
        euler_eta: charge.map(|_| euler_eta),
        euler_gamma,
        fitted_charge: (fit_den > 0.0).then(|| fit_num / fit_den + 1.5),
        orthogonality: point_max(&eta_sum),
        anticommutator,
    })
}
