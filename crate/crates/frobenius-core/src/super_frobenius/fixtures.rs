//! Reference data: random odd potentials, an explicit flat two-point family
//! and strict special systems built from it.

use super::potential::{CoefficientFn, SuperCoordinates, SuperPotential};
use super::schlesinger::StrictSpecialSystem;
use super::{c64, SuperMatrix};
use crate::grassmann::SuperJet;
use crate::jet::Jet;
use crate::linalg::{self, CMat, CVec};
use crate::{Error, Result, C64};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `sum_S theta^S f_S(u)` over odd subsets `S`, each `f_S` a random quadratic
/// polynomial plus an exponential. Singletons get a large constant so that
/// every `eta` is invertible. Returns the potential and a point near the origin.
pub fn random_odd_potential(n: usize, rng: &mut ChaCha8Rng) -> (SuperPotential, Vec<C64>) {
    let mut r = |scale: f64| C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
    let mut components: Vec<(u32, CoefficientFn)> = Vec::new();
    for mask in 1u32..1 << n {
        if mask.count_ones() % 2 == 0 {
            continue;
        }
        let constant = r(1.0)
            + if mask.count_ones() == 1 {
                c64(3.0)
            } else {
                c64(0.0)
            };
        let linear: Vec<C64> = (0..n).map(|_| r(1.0)).collect();
        let quadratic: Vec<C64> = (0..n * n).map(|_| r(0.5)).collect();
        let amplitude = r(0.5);
        let rate: Vec<C64> = (0..n).map(|_| r(1.0)).collect();
        let f: CoefficientFn = Arc::new(move |u: &[Jet]| {
            let layout = u[0].layout();
            let mut acc = Jet::constant(layout, constant);
            let mut exponent = Jet::zero(layout);
            for a in 0..n {
                acc = &acc + &u[a].scale(linear[a]);
                exponent = &exponent + &u[a].scale(rate[a]);
                for b in 0..n {
                    acc = &acc + &(&u[a] * &u[b]).scale(quadratic[a * n + b]);
                }
            }
            Ok(&acc + &exponent.exp().scale(amplitude))
        });
        components.push((mask, f));
    }
    let u = (0..n).map(|_| r(0.5)).collect();
    (
        SuperPotential::from_components(n, components).expect("odd masks"),
        u,
    )
}

/// `Psi = k (u^1 - u^2)^(D - 3/2) (theta^1 - theta^2) + c_1 theta^1 + c_2 theta^2`.
///
/// For `c = 0` this is flat with flat identities and Euler weight `D`; the
/// constants `c` keep flatness but break the Euler property.
pub fn two_point_potential(k: C64, charge: f64, constants: [C64; 2]) -> SuperPotential {
    SuperPotential::new(2, move |x: &SuperCoordinates| {
        let diff = &x.u_jets[0] - &x.u_jets[1];
        let phi = x.lift(diff.powf(charge - 1.5)?.scale(k));
        let odd = &x.theta[0] - &x.theta[1];
        let shift = &x.theta[0].scale(constants[0]) + &x.theta[1].scale(constants[1]);
        Ok(&(&phi * &odd) + &shift)
    })
}

/// `n = 2` strict special system obtained by transporting the coordinate
/// projectors with `exp(s V)`, `s = ln(u^1 - u^2 - theta^1 theta^2)`.
///
/// `V = lambda [[0, 1], [1, 0]]`, `h = diag(eta_scale, -eta_scale)`,
/// `eps = (1, 1)` and `D = 3/2 - 2 lambda`. It reproduces
/// [`two_point_potential`] with `k = eta_scale`.
pub fn lifted_two_pole(lambda: f64, eta_scale: f64, kappa: C64) -> Result<StrictSpecialSystem> {
    if eta_scale == 0.0 {
        return Err(Error::InvalidParameter("eta_scale must be nonzero".into()));
    }
    let v = CMat::from_fn(2, 2, |i, j| if i == j { c64(0.0) } else { c64(lambda) });
    let h = linalg::diag(&[c64(eta_scale), c64(-eta_scale)]);
    let eps = CVec::from_element(2, c64(1.0));
    StrictSpecialSystem::new(
        h,
        v,
        kappa,
        eps,
        c64(1.5 - 2.0 * lambda),
        move |c: &SuperCoordinates| {
            let distance = &(&c.u[0] - &c.u[1]) - &(&c.theta[0] * &c.theta[1]);
            let s = distance.ln()?;
            let plus = s.scale(c64(lambda)).exp();
            let minus = s.scale(c64(-lambda)).exp();
            let cosh = (&plus + &minus).scale(c64(0.5));
            let sinh = (&plus - &minus).scale(c64(0.5));
            let zero = c.zero();
            // exp(sV) = cosh + sinh [[0,1],[1,0]]; its inverse flips the sign of sinh.
            let projector = |k: usize| -> SuperMatrix {
                let col: [SuperJet; 2] = if k == 0 {
                    [cosh.clone(), sinh.clone()]
                } else {
                    [sinh.clone(), cosh.clone()]
                };
                let row: [SuperJet; 2] = if k == 0 {
                    [cosh.clone(), -&sinh]
                } else {
                    [-&sinh, cosh.clone()]
                };
                let mut p = vec![vec![zero.clone(); 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        p[i][j] = &col[i] * &row[j];
                    }
                }
                p
            };
            Ok(vec![projector(0), projector(1)])
        },
    )
}

/// Constant coordinate projectors with a random diagonal `h` (summing to zero
/// against `eps = (1, .., 1)`) and an `h`-skew `V` with `V eps = (3 - 2D)/4 eps`.
/// Satisfies every pointwise condition but not the flow.
pub fn pointwise_strict_special(
    n: usize,
    charge: f64,
    kappa: C64,
    seed: u64,
) -> Result<StrictSpecialSystem> {
    if n < 2 {
        return Err(Error::InvalidParameter("need n >= 2".into()));
    }
    let mut rng = rng(seed);
    let mut eta: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(0.5..2.0) * if rng.gen() { 1.0 } else { -1.0 })
        .collect();
    let mean = eta.iter().sum::<f64>() / n as f64;
    for e in &mut eta {
        *e -= mean;
    }
    if eta.iter().any(|e| e.abs() < 1e-3) {
        return Err(Error::InvalidParameter(
            "degenerate random metric; pick another seed".into(),
        ));
    }
    let h = linalg::diag(&eta.iter().map(|&e| c64(e)).collect::<Vec<_>>());
    let eps = CVec::from_element(n, c64(1.0));
    let mu = c64((3.0 - 2.0 * charge) / 4.0);
    let mut k0 = CMat::from_fn(n, n, |_, _| c64(rng.gen_range(-1.0..1.0)));
    k0 = &k0 - k0.transpose();
    let w = &h * &eps * mu;
    let correction = &w - &k0 * &eps;
    let k = &k0 + (&correction * eps.transpose() - &eps * correction.transpose()) / c64(n as f64);
    let v = linalg::inverse(&h)? * k;
    StrictSpecialSystem::new(
        h,
        v,
        kappa,
        eps,
        c64(charge),
        move |c: &SuperCoordinates| {
            Ok((0..n)
                .map(|m| {
                    let mut p = vec![vec![c.zero(); n]; n];
                    p[m][m] = c.constant(c64(1.0));
                    p
                })
                .collect())
        },
    )
}
