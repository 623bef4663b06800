use frobenius_core::gw_recursion::{compute_gw_table, GwKey};
use frobenius_core::linalg::CMat;
use frobenius_core::pr_bridge::closed_forms;
use frobenius_core::schlesinger::{build_special, sample_initial_space, schlesinger_rhs};
use frobenius_core::C64;
use num_traits::Signed;
use proptest::prelude::*;
use std::sync::OnceLock;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn p2_table() -> &'static frobenius_core::gw_recursion::GwTable {
    static TABLE: OnceLock<frobenius_core::gw_recursion::GwTable> = OnceLock::new();
    TABLE.get_or_init(|| compute_gw_table(3, 4).unwrap())
}

#[test]
fn tables_are_nonnegative_and_graded() {
    for r in 2..=4u32 {
        let table = compute_gw_table(r, if r == 4 { 3 } else { 4 }).unwrap();
        for (key, value) in table.iter() {
            assert!(
                !value.is_negative(),
                "I({}; {}) < 0",
                key.degree(),
                key.label()
            );
            let sum: u64 = key.insertions().iter().map(|&a| u64::from(a)).sum();
            let n = key.insertions().len() as u64;
            assert_eq!(
                sum - n,
                u64::from(r + 1) * u64::from(key.degree()) + u64::from(r) - 3
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn keys_are_symmetric_in_the_insertions(d in 1u32..=4, seed in any::<u64>()) {
        let table = p2_table();
        let keys: Vec<_> = table.iter().filter(|(k, _)| k.degree() == d).map(|(k, v)| (k.clone(), v.clone())).collect();
        let (key, value) = &keys[(seed % keys.len() as u64) as usize];
        let mut shuffled = key.insertions().to_vec();
        let len = shuffled.len();
        for i in 0..len {
            let j = ((seed >> (i % 16)) as usize + i * 7) % len;
            shuffled.swap(i, j);
        }
        let again = GwKey::new(3, d, shuffled.clone()).unwrap();
        prop_assert_eq!(&again, key);
        prop_assert_eq!(GwKey::new(3, d, again.insertions().to_vec()).unwrap(), again);
        prop_assert_eq!(table.value(d, &shuffled), Some(value));
    }

    #[test]
    fn closed_forms_are_translation_covariant(r in 2usize..=6, x0 in -1.0..1.0f64, x1 in -2.0..2.0f64, shift in -1.0..1.0f64) {
        let a = closed_forms(r, c(x0, 0.0), c(x1, 0.0)).unwrap();
        let b = closed_forms(r, c(x0 + shift, 0.0), c(x1, 0.0)).unwrap();
        for i in 0..=r {
            prop_assert!((b.u(i) - a.u(i) - c(shift, 0.0)).norm() < 1e-12);
            prop_assert!((b.eta(i) - a.eta(i)).norm() < 1e-12);
        }
    }

    #[test]
    fn closed_form_initial_data_are_special(r in 2usize..=6, x1 in prop::sample::select(vec![0.0, 1.0, -1.0, 2.0, -2.0])) {
        let forms = closed_forms(r, c(0.0, 0.0), c(x1, 0.0)).unwrap();
        let res = forms.init_data().residuals();
        prop_assert!(res.skew < 1e-12 && res.column_sums < 1e-12 && res.eta_sum < 1e-12, "{res:?}");
        for i in 0..=r {
            for k in 0..=r {
                if i != k {
                    let a = forms.eta_derivative(k, i).unwrap();
                    let b = forms.eta_derivative(i, k).unwrap();
                    prop_assert!((a - b).norm() <= 4.0 * f64::EPSILON * a.norm(), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn special_flows_conserve_w_and_spectra(
        m in 2usize..=5,
        charge in -1.0..2.0f64,
        raw in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16),
        dir in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 5),
    ) {
        // eta summing to zero, every entry bounded away from zero
        let mut eta: Vec<C64> = (0..m - 1).map(|k| c(1.0 + raw[k].0.abs(), raw[k].1)).collect();
        let last = -eta.iter().sum::<C64>();
        prop_assume!(last.norm() > 0.1);
        eta.push(last);
        let free = (m - 1) * (m - 2) / 2;
        let upper: Vec<C64> = raw[8..8 + free].iter().map(|&(a, b)| c(a, b)).collect();
        let data = sample_initial_space(m, charge, &eta, &upper).unwrap();
        let res = data.residuals();
        prop_assert!(res.skew < 1e-10 && res.column_sums < 1e-10, "{res:?}");

        let u: Vec<C64> = (0..m).map(|k| c(k as f64, 0.3 * k as f64 * k as f64)).collect();
        let s = build_special(&data, &u).unwrap();
        let direction: Vec<C64> = dir[..m].iter().map(|&(a, b)| c(a, b)).collect();
        let rhs = schlesinger_rhs(&s, &direction).unwrap();
        let total = rhs.iter().fold(CMat::zeros(m, m), |acc, d| acc + d);
        let scale = rhs.iter().map(max_abs).fold(1.0, f64::max);
        prop_assert!(max_abs(&total) < 1e-12 * scale);
        for (a, da) in s.residues.iter().zip(&rhs) {
            // d tr(A^k) = k tr(A^{k-1} dA) vanishes
            prop_assert!(da.trace().norm() < 1e-12 * scale);
            prop_assert!((a * da).trace().norm() < 1e-12 * scale);
            // rank one with eigenvalue -1/2
            prop_assert!(max_abs(&(a * a + a * c(0.5, 0.0))) < 1e-10 * (1.0 + max_abs(a)).powi(2));
        }
    }

    #[test]
    fn two_pole_pairing_is_constant(
        raw in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 8),
        dir in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
    ) {
        let a1 = CMat::from_fn(2, 2, |i, j| c(raw[2 * i + j].0, raw[2 * i + j].1));
        let a2 = CMat::from_fn(2, 2, |i, j| c(raw[4 + 2 * i + j].0, raw[4 + 2 * i + j].1));
        let s = frobenius_core::schlesinger::SchlesingerSystem::new(vec![c(0.0, 0.0), c(1.0, 0.5)], vec![a1.clone(), a2.clone()], CMat::identity(2, 2)).unwrap();
        let rhs = schlesinger_rhs(&s, &[c(dir.0, dir.1), c(dir.2, dir.3)]).unwrap();
        let d_pairing = (&rhs[0] * &a2 + &a1 * &rhs[1]).trace();
        prop_assert!(d_pairing.norm() < 1e-12);
    }
}
