//! Tangent vectors, the two multiplications, the parity flip and bilinear
//! forms of either parity, plus the checks of the split connection.

use super::c64;
use super::potential::SuperChart;
use crate::grassmann::{Coefficient, Grassmann, GrassmannElement, SuperJet};
use crate::jet::Jet;
use crate::{Result, C64};
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Components in the basis `(e_1, .., e_n, d_1, .., d_n)`: odd slots first.
pub type TangentVector<T = Jet> = Vec<Grassmann<T>>;

pub fn is_odd_slot(n: usize, slot: usize) -> bool {
    slot < n
}

pub fn basis_vector<T: Coefficient>(
    n: usize,
    slot: usize,
    generators: usize,
    proto: &T,
) -> TangentVector<T> {
    let mut v = vec![Grassmann::zero(generators, proto); 2 * n];
    v[slot] = Grassmann::scalar(generators, proto.constant_like(c64(1.0)));
    v
}

/// The two multiplications of the algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Product {
    /// Odd times odd is even; identity `e = sum of even basis vectors`.
    Circle,
    /// Odd times odd is odd; identity `eps = sum of odd basis vectors`.
    Bullet,
}

/// Slot of `b_a * b_b`, or `None` when the product vanishes.
fn product_slot(n: usize, which: Product, a: usize, b: usize) -> Option<usize> {
    if a % n != b % n {
        return None;
    }
    let i = a % n;
    let both = is_odd_slot(n, a) == is_odd_slot(n, b);
    let even_result = match which {
        Product::Circle => both,
        Product::Bullet => !both,
    };
    Some(if even_result { n + i } else { i })
}

/// Product of two vectors. Moving the right coefficient past an odd basis
/// vector (for `Circle`) or an even one (for `Bullet`) applies the involution.
pub fn multiply<T: Coefficient>(
    n: usize,
    which: Product,
    x: &[Grassmann<T>],
    y: &[Grassmann<T>],
) -> TangentVector<T> {
    let gens = x[0].generators();
    let proto = x[0].proto().zero_like();
    let mut out = vec![Grassmann::zero(gens, &proto); 2 * n];
    for a in 0..2 * n {
        if x[a].is_zero() {
            continue;
        }
        for b in 0..2 * n {
            let Some(slot) = product_slot(n, which, a, b) else {
                continue;
            };
            let twist = match which {
                Product::Circle => is_odd_slot(n, a),
                Product::Bullet => !is_odd_slot(n, a),
            };
            let yb = if twist {
                y[b].involution()
            } else {
                y[b].clone()
            };
            out[slot] = &out[slot] + &(&x[a] * &yb);
        }
    }
    out
}

/// The parity flip swapping `e_a` (odd) and its even partner.
pub fn odd_involution<T: Coefficient>(n: usize, x: &[Grassmann<T>]) -> TangentVector<T> {
    let mut out = x.to_vec();
    for a in 0..2 * n {
        let target = if a < n { a + n } else { a - n };
        out[target] = x[a].involution();
    }
    out
}

/// A bilinear form given by its Gram matrix on the basis.
#[derive(Clone, Debug)]
pub struct BilinearForm<T: Coefficient = Jet> {
    pub odd: bool,
    pub gram: Vec<Vec<Grassmann<T>>>,
}

fn twist<T: Coefficient>(x: &Grassmann<T>, odd: bool) -> Grassmann<T> {
    if odd {
        x.involution()
    } else {
        x.clone()
    }
}

impl<T: Coefficient> BilinearForm<T> {
    /// `B(x, y)`; left coefficients pass the form, right ones also pass the left basis vector.
    pub fn pair(&self, n: usize, x: &[Grassmann<T>], y: &[Grassmann<T>]) -> Grassmann<T> {
        let gens = x[0].generators();
        let mut acc = Grassmann::zero(gens, &x[0].proto().zero_like());
        for a in 0..2 * n {
            if x[a].is_zero() {
                continue;
            }
            let xa = twist(&x[a], self.odd);
            for b in 0..2 * n {
                if self.gram[a][b].is_zero() || y[b].is_zero() {
                    continue;
                }
                let yb = twist(&y[b], self.odd ^ is_odd_slot(n, a));
                acc = &acc + &(&(&xa * &yb) * &self.gram[a][b]);
            }
        }
        acc
    }
}

/// `(nabla_m B)(b_A, b_B)` for a connection given by `table[B] = nabla_m b_B`.
fn form_derivative(
    n: usize,
    form: &BilinearForm<Jet>,
    m: usize,
    table: &[TangentVector<Jet>],
) -> Result<f64> {
    let gens = form.gram[0][0].generators();
    let proto = form.gram[0][0].proto().zero_like();
    let mut worst: f64 = 0.0;
    for a in 0..2 * n {
        let ba = basis_vector(n, a, gens, &proto);
        for b in 0..2 * n {
            let bb = basis_vector(n, b, gens, &proto);
            let d = form.gram[a][b].susy_derivative(m)?;
            let t1 = form.pair(n, &table[a], &bb);
            let t2 = form.pair(n, &ba, &table[b]);
            let s1 = if form.odd { -1.0 } else { 1.0 };
            let s2 = if form.odd ^ is_odd_slot(n, a) {
                -1.0
            } else {
                1.0
            };
            let r = &(&d - &t1.scale(c64(s1))) - &t2.scale(c64(s2));
            worst = worst.max(r.at_point().max_abs());
        }
    }
    Ok(worst)
}

/// Residuals of the metric and connection identities of the split tangent algebra.
#[derive(Clone, Debug)]
pub struct TnablaReport {
    /// `nabla g = 0` for the Levi-Civita table along the odd frame.
    pub levi_civita_compatibility: f64,
    /// `g(e~_a, e~_b) = 0` for the lifted even frame.
    pub isotropy: f64,
    /// `h(X, Y) = g(X, s Pi Y)` on the odd half.
    pub h_from_g: f64,
    /// `g~(X, Y) = g(s X, s Y)`.
    pub g_tilde_from_g: f64,
    pub h_parallel: f64,
    pub g_tilde_parallel: f64,
    /// Projected Levi-Civita connection on the odd half against the closed form.
    pub pi_compat_odd: f64,
    /// The same on the even half through the splitting.
    pub pi_compat_even: f64,
    /// `G_ma + G_am = 2 delta_ma G_mm` for the connection matrices.
    pub symmetry: f64,
    /// `G_ma^b eta_b = 0` on distinct triples; `None` for `n < 3`.
    pub orthogonality: Option<f64>,
    /// `g~(X o Y, Z) = g~(X, Y o Z)` on random homogeneous triples.
    pub frobenius_pairing: f64,
    /// `g~(X, Y) = theta(X o Y)`.
    pub theta_form: f64,
    /// Associativity of `o` on the same samples.
    pub algebra: f64,
    /// `coefficients[m][a][b]`: component on `e_b` of `nabla~_m e_a`, at the point.
    pub coefficients: Vec<Vec<Vec<GrassmannElement>>>,
}

impl TnablaReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.levi_civita_compatibility,
            self.isotropy,
            self.h_from_g,
            self.g_tilde_from_g,
            self.h_parallel,
            self.g_tilde_parallel,
            self.pi_compat_odd,
            self.pi_compat_even,
            self.symmetry,
            self.orthogonality.unwrap_or(0.0),
            self.frobenius_pairing,
            self.theta_form,
            self.algebra,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl SuperChart {
    /// Gram matrix of the odd Egoroff metric `g` on `TM`.
    pub fn egoroff_metric(&self) -> BilinearForm<Jet> {
        let n = self.n;
        let mut gram = vec![vec![self.zero(); 2 * n]; 2 * n];
        for a in 0..n {
            gram[n + a][n + a] = -&self.eta_odd[a];
            gram[n + a][a] = self.eta[a].clone();
            gram[a][n + a] = self.eta[a].clone();
        }
        BilinearForm { odd: true, gram }
    }

    /// The even form `h`, diagonal with entries `eta_a` on both halves.
    pub fn h_form(&self) -> BilinearForm<Jet> {
        let n = self.n;
        let mut gram = vec![vec![self.zero(); 2 * n]; 2 * n];
        for a in 0..n {
            gram[a][a] = self.eta[a].clone();
            gram[n + a][n + a] = self.eta[a].clone();
        }
        BilinearForm { odd: false, gram }
    }

    /// The odd form `g~` pairing each odd basis vector with its even partner.
    pub fn g_tilde_form(&self) -> BilinearForm<Jet> {
        let n = self.n;
        let mut gram = vec![vec![self.zero(); 2 * n]; 2 * n];
        for a in 0..n {
            gram[n + a][a] = self.eta[a].clone();
            gram[a][n + a] = self.eta[a].clone();
        }
        BilinearForm { odd: true, gram }
    }

    /// Lift `e~_a = d_a - sum_b c[b][a] e_b` of the even basis vector `a` into `TM`.
    pub fn lifted_even(&self, a: usize) -> TangentVector<Jet> {
        let n = self.n;
        let mut v = self.zero_vector();
        v[n + a] = self.coords.constant(c64(1.0));
        for b in 0..n {
            v[b] = -&self.splitting_coefficient(b, a);
        }
        v
    }

    /// Splitting `T -> TM`: odd half unchanged, even half lifted.
    pub fn split(&self, x: &[SuperJet]) -> TangentVector<Jet> {
        let n = self.n;
        let mut out = self.zero_vector();
        for a in 0..n {
            out[a] = &out[a] + &x[a];
            if x[n + a].is_zero() {
                continue;
            }
            let lift = self.lifted_even(a);
            for (o, l) in out.iter_mut().zip(&lift) {
                *o = &*o + &(&x[n + a] * l);
            }
        }
        out
    }

    /// Projection `TM -> T_1` along the lifted even frame.
    pub fn project_odd(&self, x: &[SuperJet]) -> Vec<SuperJet> {
        let n = self.n;
        (0..n)
            .map(|b| {
                (0..n).fold(x[b].clone(), |acc, a| {
                    &acc + &(&x[n + a] * &self.splitting_coefficient(b, a))
                })
            })
            .collect()
    }

    /// Table `nabla~_m b_B` on `T` in the basis of `T`.
    pub fn tnabla_table(&self) -> Vec<Vec<TangentVector<Jet>>> {
        let n = self.n;
        let coeffs = self.tnabla_coefficients();
        (0..n)
            .map(|m| {
                (0..2 * n)
                    .map(|slot| {
                        let a = slot % n;
                        let offset = if slot < n { 0 } else { n };
                        let mut v = self.zero_vector();
                        for b in 0..n {
                            v[offset + b] = coeffs[m][a][b].clone();
                        }
                        v
                    })
                    .collect()
            })
            .collect()
    }
}

fn random_element(gens: usize, odd: bool, rng: &mut ChaCha8Rng) -> GrassmannElement {
    let terms = (0u32..1 << gens)
        .filter(|m| (m.count_ones() % 2 == 1) == odd)
        .map(|m| {
            (
                m,
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            )
        })
        .collect::<Vec<_>>();
    Grassmann::from_terms(gens, &c64(0.0), terms)
}

fn random_vector(n: usize, gens: usize, odd: bool, rng: &mut ChaCha8Rng) -> TangentVector<C64> {
    (0..2 * n)
        .map(|a| random_element(gens, odd ^ is_odd_slot(n, a), rng))
        .collect()
}

fn vec_max(x: &[GrassmannElement]) -> f64 {
    x.iter().fold(0.0, |acc, c| acc.max(c.max_abs()))
}

fn vec_sub(x: &[GrassmannElement], y: &[GrassmannElement]) -> Vec<GrassmannElement> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

fn point_form(form: &BilinearForm<Jet>) -> BilinearForm<C64> {
    BilinearForm {
        odd: form.odd,
        gram: form
            .gram
            .iter()
            .map(|r| r.iter().map(SuperJet::at_point).collect())
            .collect(),
    }
}

/// Checks the metric, splitting and connection identities at the chart point,
/// sampling `samples` random homogeneous triples for the algebraic identities.
pub fn tnabla_and_metrics(chart: &SuperChart, samples: usize, seed: u64) -> Result<TnablaReport> {
    let n = chart.n;
    let gens = chart.generators();
    let proto = Jet::zero(&chart.coords.layout);
    let g = chart.egoroff_metric();
    let h = chart.h_form();
    let gt = chart.g_tilde_form();
    let point = |x: &SuperJet| x.at_point().max_abs();

    let mut levi_civita_compatibility: f64 = 0.0;
    let tn = chart.tnabla_table();
    let mut h_parallel: f64 = 0.0;
    let mut g_tilde_parallel: f64 = 0.0;
    for m in 0..n {
        levi_civita_compatibility =
            levi_civita_compatibility.max(form_derivative(n, &g, m, &chart.levi_civita[m])?);
        h_parallel = h_parallel.max(form_derivative(n, &h, m, &tn[m])?);
        g_tilde_parallel = g_tilde_parallel.max(form_derivative(n, &gt, m, &tn[m])?);
    }

    let lifts: Vec<_> = (0..n).map(|a| chart.lifted_even(a)).collect();
    let mut isotropy: f64 = 0.0;
    for x in &lifts {
        for y in &lifts {
            isotropy = isotropy.max(point(&g.pair(n, x, y)));
        }
    }

    let basis: Vec<_> = (0..2 * n)
        .map(|s| basis_vector(n, s, gens, &proto))
        .collect();
    let mut h_from_g: f64 = 0.0;
    let mut g_tilde_from_g: f64 = 0.0;
    for a in 0..2 * n {
        for b in 0..2 * n {
            if a < n && b < n {
                let flipped = chart.split(&odd_involution(n, &basis[b]));
                let r = &g.pair(n, &basis[a], &flipped) - &h.gram[a][b];
                h_from_g = h_from_g.max(point(&r));
            }
            let r = &g.pair(n, &chart.split(&basis[a]), &chart.split(&basis[b])) - &gt.gram[a][b];
            g_tilde_from_g = g_tilde_from_g.max(point(&r));
        }
    }

    let coeffs = chart.tnabla_coefficients();
    let mut pi_compat_odd: f64 = 0.0;
    let mut pi_compat_even: f64 = 0.0;
    for m in 0..n {
        for a in 0..n {
            let odd = chart.project_odd(&chart.levi_civita[m][a]);
            let mut even: Vec<SuperJet> = (0..n)
                .map(|b| chart.levi_civita[m][n + a][n + b].clone())
                .collect();
            for c in 0..n {
                let k = chart.splitting_coefficient(c, a);
                for (b, slot) in even.iter_mut().enumerate() {
                    *slot = &*slot + &(&k * &chart.levi_civita[m][c][n + b]);
                }
            }
            for b in 0..n {
                pi_compat_odd = pi_compat_odd.max(point(&(&odd[b] - &coeffs[m][a][b])));
                pi_compat_even = pi_compat_even.max(point(&(&even[b] - &coeffs[m][a][b])));
            }
        }
    }

    let mut symmetry: f64 = 0.0;
    let mut orthogonality: Option<f64> = None;
    for m in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut s = &coeffs[m][a][b] + &coeffs[a][m][b];
                if m == a {
                    s = &s - &coeffs[m][m][b].scale(c64(2.0));
                }
                symmetry = symmetry.max(point(&s));
                if m != a && a != b && m != b {
                    let r = point(&(&coeffs[m][a][b] * &chart.eta[b]));
                    orthogonality = Some(orthogonality.unwrap_or(0.0).max(r));
                }
            }
        }
    }

    let gt0 = point_form(&gt);
    let theta: Vec<GrassmannElement> = (0..2 * n)
        .map(|a| {
            if a < n {
                chart.eta[a].at_point()
            } else {
                Grassmann::zero(gens, &c64(0.0))
            }
        })
        .collect();
    let theta_of = |x: &[GrassmannElement]| {
        x.iter()
            .zip(&theta)
            .fold(Grassmann::zero(gens, &c64(0.0)), |acc, (c, t)| {
                &acc + &(&c.involution() * t)
            })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frobenius_pairing: f64 = 0.0;
    let mut theta_form: f64 = 0.0;
    let mut algebra: f64 = 0.0;
    for _ in 0..samples {
        let parities: [bool; 3] = [rng.gen(), rng.gen(), rng.gen()];
        let x = random_vector(n, gens, parities[0], &mut rng);
        let y = random_vector(n, gens, parities[1], &mut rng);
        let z = random_vector(n, gens, parities[2], &mut rng);
        let xy = multiply(n, Product::Circle, &x, &y);
        let yz = multiply(n, Product::Circle, &y, &z);
        let lhs = gt0.pair(n, &xy, &z);
        let rhs = gt0.pair(n, &x, &yz);
        frobenius_pairing = frobenius_pairing.max((&lhs - &rhs).max_abs());
        theta_form = theta_form.max((&gt0.pair(n, &x, &y) - &theta_of(&xy)).max_abs());
        let assoc = vec_sub(
            &multiply(n, Product::Circle, &xy, &z),
            &multiply(n, Product::Circle, &x, &yz),
        );
        algebra = algebra.max(vec_max(&assoc));
    }

    Ok(TnablaReport {
        levi_civita_compatibility,
        isotropy,
        h_from_g,
        g_tilde_from_g,
        h_parallel,
        g_tilde_parallel,
        pi_compat_odd,
        pi_compat_even,
        symmetry,
        orthogonality,
        frobenius_pairing,
        theta_form,
        algebra,
        coefficients: coeffs
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| c.iter().map(SuperJet::at_point).collect())
                    .collect()
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::super_frobenius::fixtures;
    use crate::super_frobenius::{egoroff_chart, ChartOptions};

    fn homogeneous(n: usize, odd: bool, rng: &mut ChaCha8Rng) -> TangentVector<C64> {
        random_vector(n, n + 1, odd, rng)
    }

    #[test]
    fn products_are_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p: [bool; 3] = [rng.gen(), rng.gen(), rng.gen()];
            let x = homogeneous(2, p[0], &mut rng);
            let y = homogeneous(2, p[1], &mut rng);
            let z = homogeneous(2, p[2], &mut rng);
            for which in [Product::Circle, Product::Bullet] {
                let l = multiply(2, which, &multiply(2, which, &x, &y), &z);
                let r = multiply(2, which, &x, &multiply(2, which, &y, &z));
                assert!(vec_max(&vec_sub(&l, &r)) < 1e-12, "{which:?}");
            }
        }
    }

    #[test]
    fn units_and_parity_flip() {
        let n = 3;
        let gens = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let zero = c64(0.0);
        let mut e = vec![Grassmann::zero(gens, &zero); 2 * n];
        let mut eps = e.clone();
        for a in 0..n {
            e[n + a] = Grassmann::scalar(gens, c64(1.0));
            eps[a] = Grassmann::scalar(gens, c64(1.0));
        }
        for odd in [false, true] {
            let x = random_vector(n, gens, odd, &mut rng);
            assert!(vec_max(&vec_sub(&multiply(n, Product::Circle, &e, &x), &x)) < 1e-14);
            assert!(vec_max(&vec_sub(&multiply(n, Product::Bullet, &eps, &x), &x)) < 1e-14);
            // eps o X = Pi X
            let flipped = odd_involution(n, &x);
            assert!(vec_max(&vec_sub(&multiply(n, Product::Circle, &eps, &x), &flipped)) < 1e-14);
            let twice = odd_involution(n, &odd_involution(n, &x));
            assert!(vec_max(&vec_sub(&twice, &x)) < 1e-15);
        }
    }

    #[test]
    fn form_sign_rules() {
        // B(aX, Y) = (-1)^{|a||B|} a B(X, Y) for an odd scalar a.
        let n = 2;
        let gens = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for odd_form in [false, true] {
            let gram = (0..2 * n)
                .map(|a| {
                    (0..2 * n)
                        .map(|b| {
                            random_element(
                                gens,
                                odd_form ^ (is_odd_slot(n, a) != is_odd_slot(n, b)),
                                &mut rng,
                            )
                        })
                        .collect()
                })
                .collect();
            let form = BilinearForm {
                odd: odd_form,
                gram,
            };
            let x = random_vector(n, gens, false, &mut rng);
            let y = random_vector(n, gens, true, &mut rng);
            let a = random_element(gens, true, &mut rng);
            let ax: Vec<_> = x.iter().map(|c| &a * c).collect();
            let sign = if odd_form { -1.0 } else { 1.0 };
            let lhs = form.pair(n, &ax, &y);
            let rhs = (&a * &form.pair(n, &x, &y)).scale(c64(sign));
            assert!((&lhs - &rhs).max_abs() < 1e-12);
            // B(X, aY) = (-1)^{|a|(|B| + |X|)} a B(X, Y) with X even.
            let ay: Vec<_> = y.iter().map(|c| &a * c).collect();
            let lhs = form.pair(n, &x, &ay);
            let rhs = (&a * &form.pair(n, &x, &y)).scale(c64(sign));
            assert!((&lhs - &rhs).max_abs() < 1e-12);
        }
    }

    #[test]
    fn split_connection_on_random_potentials() {
        // The identities below hold for every odd potential, flat or not.
        let mut rng = fixtures::rng(11);
        for n in [1, 2, 3] {
            let (psi, u) = fixtures::random_odd_potential(n, &mut rng);
            let chart = egoroff_chart(&psi, &u, &ChartOptions::default()).unwrap();
            let r = tnabla_and_metrics(&chart, 10, 1).unwrap();
            assert!(r.levi_civita_compatibility < 1e-9, "{r:?}");
            assert!(
                r.isotropy < 1e-10 && r.h_from_g < 1e-12 && r.g_tilde_from_g < 1e-10,
                "{r:?}"
            );
            assert!(r.h_parallel < 1e-10 && r.g_tilde_parallel < 1e-10, "{r:?}");
            assert!(r.pi_compat_odd < 1e-10 && r.pi_compat_even < 1e-10, "{r:?}");
            assert!(
                r.symmetry < 1e-12 && r.orthogonality.unwrap_or(0.0) < 1e-12,
                "{r:?}"
            );
            assert!(
                r.frobenius_pairing < 1e-10 && r.theta_form < 1e-10 && r.algebra < 1e-10,
                "{r:?}"
            );
        }
    }
}
