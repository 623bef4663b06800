//! The even operator `V` on the odd half of the tangent algebra.

use super::potential::{super_residuals, SuperChart};
use super::tangent::TangentVector;
use super::{c64, commutator, mat_add, mat_max_at_point, mat_sub, SuperMatrix};
use crate::grassmann::{GrassmannElement, SuperJet};
use crate::jet::Jet;
use crate::{Error, Result, C64};
use alloc::vec;
use alloc::vec::Vec;

impl SuperChart {
    /// Levi-Civita derivative of a vector field along the odd frame vector `m`.
    pub fn covariant_derivative(&self, m: usize, x: &[SuperJet]) -> Result<TangentVector<Jet>> {
        let mut out = self.zero_vector();
        for (a, xa) in x.iter().enumerate() {
            if xa.is_zero() {
                continue;
            }
            out[a] = &out[a] + &xa.susy_derivative(m)?;
            let twisted = xa.involution();
            for (o, l) in out.iter_mut().zip(&self.levi_civita[m][a]) {
                if !l.is_zero() {
                    *o = &*o + &(&twisted * l);
                }
            }
        }
        Ok(out)
    }

    /// The Euler field `sum u^a d_a + theta^a e_a / 2` in the `TM` basis.
    pub fn euler_field(&self) -> TangentVector<Jet> {
        let n = self.n;
        let mut v = self.zero_vector();
        for a in 0..n {
            v[n + a] = self.coords.u[a].clone();
            v[a] = self.coords.theta[a].scale(c64(0.5));
        }
        v
    }

    /// Connection matrices of `nabla~` on the odd half: `[m][b][d]` is the `e_b` component of `nabla~_m e_d`.
    pub(crate) fn tnabla_matrices(&self) -> Vec<SuperMatrix> {
        let coeffs = self.tnabla_coefficients();
        let n = self.n;
        (0..n)
            .map(|m| {
                (0..n)
                    .map(|b| (0..n).map(|d| coeffs[m][d][b].clone()).collect())
                    .collect()
            })
            .collect()
    }

    /// `nabla~_m M = e_m M + [G_m, M]` for an even endomorphism of the odd half.
    pub(crate) fn tnabla_endomorphism(
        &self,
        m: usize,
        g: &SuperMatrix,
        mat: &SuperMatrix,
    ) -> Result<SuperMatrix> {
        let derived = mat
            .iter()
            .map(|r| {
                r.iter()
                    .map(|x| x.susy_derivative(m))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(mat_add(&derived, &commutator(g, mat)))
    }
}

/// `V[b][a]`: the `e_b` component of `V(e_a) = p_1(nabla_a E) - (D - 1/2) e_a / 2`.
pub(crate) fn v_matrix(chart: &SuperChart, charge: C64) -> Result<SuperMatrix> {
    let n = chart.n;
    let euler = chart.euler_field();
    let shift = (charge - 0.5) * 0.5;
    let mut v = vec![vec![chart.zero(); n]; n];
    for a in 0..n {
        let projected = chart.project_odd(&chart.covariant_derivative(a, &euler)?);
        for b in 0..n {
            v[b][a] = projected[b].clone();
        }
        v[a][a] = &v[a][a] - &chart.coords.constant(shift);
    }
    Ok(v)
}

/// `V` from the closed form in the normalized frame `f_a = e_a / sqrt(eta_a)`.
fn v_from_rotation_coefficients(chart: &SuperChart) -> Result<SuperMatrix> {
    let n = chart.n;
    let gamma = &chart.gamma;
    let u = &chart.coords.u;
    let mut v = vec![vec![chart.zero(); n]; n];
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let mut c = &chart.coords.theta[a] * &gamma[b][a];
            c = &c + &(&u[b] * &gamma[b][a].susy_derivative(b)?);
            c = &c - &(&u[a] * &gamma[a][b].susy_derivative(a)?);
            for g in 0..n {
                if g != a && g != b {
                    c = &c + &(&u[g] * &gamma[a][b].susy_derivative(g)?);
                }
            }
            let scale = &chart.sqrt_eta[a] * &chart.sqrt_eta[b].inverse()?;
            v[b][a] = &scale * &c;
        }
    }
    Ok(v)
}

/// Properties of `V` at the chart point.
#[derive(Clone, Debug)]
pub struct SuperOperatorReport {
    /// The weight `D` used (supplied, or fitted from the Euler residual).
    pub charge: C64,
    /// `matrix[b][a]`, the `e_b` component of `V(e_a)`, at the point.
    pub matrix: Vec<Vec<GrassmannElement>>,
    /// Definitional value against the rotation-coefficient formula.
    pub formula_agreement: f64,
    /// `h(V X, Y) + h(X, V Y)` on basis pairs.
    pub h_skew: f64,
    /// `V(eps) - (3 - 2D)/4 eps`.
    pub epsilon_eigen: f64,
    /// `nabla~ V`.
    pub parallel: f64,
    /// `(theta^m - theta^n) V[n][m] / (u^m - u^n - theta^m theta^n) = -e_m eta_n / (2 eta_n)`.
    pub pole_identity: f64,
}

impl SuperOperatorReport {
    pub fn max_residual(&self) -> f64 {
        self.formula_agreement
            .max(self.h_skew)
            .max(self.epsilon_eigen)
            .max(self.parallel)
            .max(self.pole_identity)
    }
}

/// Odd fraction `(theta^m - theta^n) / (u^m - u^n - theta^m theta^n)` on the chart coordinates.
pub(crate) fn pole_fraction(
    theta: &[SuperJet],
    u: &[SuperJet],
    m: usize,
    n: usize,
) -> Result<SuperJet> {
    let denom = &(&u[m] - &u[n]) - &(&theta[m] * &theta[n]);
    Ok(&(&theta[m] - &theta[n]) * &denom.inverse()?)
}

/// Computes `V` at the chart point with the normalized Euler field and checks its properties.
pub fn super_v_operator(chart: &SuperChart, charge: Option<C64>) -> Result<SuperOperatorReport> {
    let n = chart.n;
    let charge = match charge {
        Some(d) => d,
        None => super_residuals(chart, None)?.fitted_charge.ok_or_else(|| {
            Error::DegeneratePotential("cannot fit the weight of a vanishing eta".into())
        })?,
    };
    let v = v_matrix(chart, charge)?;
    let formula = v_from_rotation_coefficients(chart)?;
    let formula_agreement = mat_max_at_point(&mat_sub(&v, &formula));

    let mut h_skew: f64 = 0.0;
    let mut epsilon_eigen: f64 = 0.0;
    let eigen = chart.coords.constant((c64(3.0) - charge * 2.0) / 4.0);
    for b in 0..n {
        let mut row = chart.zero();
        for a in 0..n {
            let s = &(&v[b][a] * &chart.eta[b]) + &(&v[a][b] * &chart.eta[a]);
            h_skew = h_skew.max(s.at_point().max_abs());
            row = &row + &v[b][a];
        }
        epsilon_eigen = epsilon_eigen.max((&row - &eigen).at_point().max_abs());
    }

    let g = chart.tnabla_matrices();
    let mut parallel: f64 = 0.0;
    for (m, gm) in g.iter().enumerate() {
        parallel = parallel.max(mat_max_at_point(&chart.tnabla_endomorphism(m, gm, &v)?));
    }

    let mut pole_identity: f64 = 0.0;
    for m in 0..n {
        for k in 0..n {
            if m == k {
                continue;
            }
            let lhs = &pole_fraction(&chart.coords.theta, &chart.coords.u, m, k)? * &v[k][m];
            let rhs = chart.over_two_eta(&chart.e_eta[m][k], k);
            pole_identity = pole_identity.max((&lhs + &rhs).at_point().max_abs());
        }
    }

    Ok(SuperOperatorReport {
        charge,
        matrix: v
            .iter()
            .map(|r| r.iter().map(SuperJet::at_point).collect())
            .collect(),
        formula_agreement,
        h_skew,
        epsilon_eigen,
        parallel,
        pole_identity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::super_frobenius::fixtures;
    use crate::super_frobenius::{egoroff_chart, ChartOptions, SuperCoordinates, SuperPotential};

    #[test]
    fn one_dimensional_operator_vanishes() {
        // Psi = theta u^p has weight D = p + 3/2 and V = 0; the odd identity is flat only for p = 0.
        for p in [0.0, 0.7] {
            let psi = SuperPotential::new(1, move |x: &SuperCoordinates| {
                Ok(&x.theta[0] * &x.lift(x.u_jets[0].powf(p)?))
            });
            let chart = egoroff_chart(&psi, &[c64(1.4)], &ChartOptions::default()).unwrap();
            let r = super_v_operator(&chart, None).unwrap();
            assert!((r.charge - c64(p + 1.5)).norm() < 1e-12);
            assert!(r.matrix[0][0].max_abs() < 1e-12, "{r:?}");
            assert!(
                r.formula_agreement < 1e-12 && r.h_skew < 1e-12 && r.parallel < 1e-12,
                "{r:?}"
            );
            assert!((r.epsilon_eigen - p / 2.0).abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn two_point_family_operator() {
        for charge in [0.0, 0.8, 2.5] {
            let psi = fixtures::two_point_potential(c64(1.1), charge, [c64(0.0), c64(0.0)]);
            let chart =
                egoroff_chart(&psi, &[c64(0.9), c64(-0.6)], &ChartOptions::default()).unwrap();
            let r = super_v_operator(&chart, Some(c64(charge))).unwrap();
            assert!(r.formula_agreement < 1e-10, "{r:?}");
            assert!(r.h_skew < 1e-10 && r.epsilon_eigen < 1e-10, "{r:?}");
            assert!(r.parallel < 1e-10 && r.pole_identity < 1e-10, "{r:?}");
            // the body of V has eigenvalues +-(3 - 2D)/4
            let off = r.matrix[0][1].body();
            assert!(
                (off * r.matrix[1][0].body() - c64(((3.0 - 2.0 * charge) / 4.0).powi(2))).norm()
                    < 1e-10
            );
        }
    }

    #[test]
    fn wrong_weight_shows_on_the_diagonal() {
        let psi = fixtures::two_point_potential(c64(1.1), 0.5, [c64(0.0), c64(0.0)]);
        let chart = egoroff_chart(&psi, &[c64(0.9), c64(-0.6)], &ChartOptions::default()).unwrap();
        let r = super_v_operator(&chart, Some(c64(1.0))).unwrap();
        // The eigenvalue relation does not see D; the diagonal of V does.
        assert!(r.epsilon_eigen < 1e-12);
        assert!(r.formula_agreement > 0.2 && r.h_skew > 0.1, "{r:?}");
    }
}
