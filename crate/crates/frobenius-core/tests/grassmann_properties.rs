use frobenius_core::grassmann::{parity_body, GrassmannElement, Parity};
use frobenius_core::C64;
use proptest::prelude::*;

const TOL: f64 = 1e-12;

/// `(n, terms)` with masks below `2^n`; `parity` keeps only homogeneous masks.
fn element(
    max_n: usize,
    parity: Option<Parity>,
) -> impl Strategy<Value = (usize, Vec<(u32, f64, f64)>)> {
    (1..=max_n).prop_flat_map(move |n| {
        let mask = (0u32..1 << n).prop_filter("parity", move |m| {
            parity.is_none_or(|p| Parity::of_mask(*m) == p)
        });
        (
            Just(n),
            prop::collection::vec((mask, -1.0..1.0f64, -1.0..1.0f64), 0..10),
        )
    })
}

fn build(n: usize, terms: &[(u32, f64, f64)]) -> GrassmannElement {
    GrassmannElement::from_terms(
        n,
        &C64::new(0.0, 0.0),
        terms.iter().map(|&(m, re, im)| (m, C64::new(re, im))),
    )
}

fn l1(x: &GrassmannElement) -> f64 {
    x.terms().map(|(_, c)| c.norm()).sum::<f64>()
}

fn close(a: &GrassmannElement, b: &GrassmannElement, scale: f64) -> bool {
    (a - b).max_abs() <= TOL * scale.max(1.0)
}

fn with_body(x: GrassmannElement, body: C64) -> GrassmannElement {
    let n = x.generators();
    &x.soul() + &GrassmannElement::constant(n, body)
}

fn sign(p: bool) -> C64 {
    C64::new(if p { -1.0 } else { 1.0 }, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn product_is_associative_and_distributive(
        (n, a) in element(8, None),
        b in prop::collection::vec((0u32..256, -1.0..1.0f64, -1.0..1.0f64), 0..10),
        c in prop::collection::vec((0u32..256, -1.0..1.0f64, -1.0..1.0f64), 0..10),
    ) {
        let cut = |t: &[(u32, f64, f64)]| t.iter().map(|&(m, re, im)| (m & ((1 << n) - 1), re, im)).collect::<Vec<_>>();
        let x = build(n, &a);
        let y = build(n, &cut(&b));
        let z = build(n, &cut(&c));
        let scale = l1(&x) * l1(&y) * l1(&z);
        prop_assert!(close(&(&(&x * &y) * &z), &(&x * &(&y * &z)), scale));
        prop_assert!(close(&(&x * &(&y + &z)), &(&(&x * &y) + &(&x * &z)), l1(&x) * (l1(&y) + l1(&z))));
    }

    #[test]
    fn homogeneous_elements_supercommute(
        (n, a) in element(8, Some(Parity::Odd)),
        b in prop::collection::vec((0u32..256, -1.0..1.0f64, -1.0..1.0f64), 0..10),
        odd_b in any::<bool>(),
    ) {
        let want = if odd_b { Parity::Odd } else { Parity::Even };
        let b: Vec<_> = b.into_iter().map(|(m, re, im)| (m & ((1 << n) - 1), re, im)).filter(|(m, _, _)| Parity::of_mask(*m) == want).collect();
        let x = build(n, &a);
        let y = build(n, &b);
        let lhs = &x * &y;
        let rhs = (&y * &x).scale(sign(odd_b));
        prop_assert!(close(&lhs, &rhs, l1(&x) * l1(&y)));
        // odd elements square to zero
        prop_assert!((&x * &x).max_abs() <= TOL * l1(&x).powi(2).max(1.0));
    }

    #[test]
    fn left_derivative_obeys_graded_leibniz(
        (n, a) in element(8, None),
        b in prop::collection::vec((0u32..256, -1.0..1.0f64, -1.0..1.0f64), 0..10),
        odd_a in any::<bool>(),
        k in 0usize..8,
    ) {
        let k = k % n;
        let want = if odd_a { Parity::Odd } else { Parity::Even };
        let a: Vec<_> = a.into_iter().filter(|(m, _, _)| Parity::of_mask(*m) == want).collect();
        let b: Vec<_> = b.into_iter().map(|(m, re, im)| (m & ((1 << n) - 1), re, im)).collect();
        let x = build(n, &a);
        let y = build(n, &b);
        let lhs = (&x * &y).left_derivative(k);
        let rhs = &(&x.left_derivative(k) * &y) + &(&x * &y.left_derivative(k)).scale(sign(odd_a));
        prop_assert!(close(&lhs, &rhs, l1(&x) * l1(&y)));
    }

    #[test]
    fn inverse_round_trip((n, a) in element(8, None), re in 0.5..2.0f64, im in -1.0..1.0f64) {
        let x = with_body(build(n, &a), C64::new(re, im));
        let inv = x.inverse().unwrap();
        let one = GrassmannElement::constant(n, C64::new(1.0, 0.0));
        let scale = (l1(&x) * l1(&inv)).max(1.0);
        prop_assert!(close(&(&x * &inv), &one, scale));
        prop_assert!(close(&(&inv * &x), &one, scale));
    }

    #[test]
    fn sqrt_round_trip((n, a) in element(8, Some(Parity::Even)), re in 0.5..2.0f64, im in -1.0..1.0f64) {
        let x = with_body(build(n, &a), C64::new(re, im));
        let root = x.sqrt().unwrap();
        prop_assert!(close(&(&root * &root), &x, l1(&root).powi(2)));
    }

    #[test]
    fn exp_and_ln_are_inverse_on_even_elements((n, a) in element(8, Some(Parity::Even)), re in 0.5..2.0f64) {
        let x = with_body(build(n, &a), C64::new(re, 0.0));
        let back = x.ln().unwrap().exp();
        prop_assert!(close(&back, &x, l1(&x).powi(3)));
    }

    #[test]
    fn involution_is_an_automorphism(
        (n, a) in element(8, None),
        b in prop::collection::vec((0u32..256, -1.0..1.0f64, -1.0..1.0f64), 0..10),
    ) {
        let b: Vec<_> = b.into_iter().map(|(m, re, im)| (m & ((1 << n) - 1), re, im)).collect();
        let x = build(n, &a);
        let y = build(n, &b);
        prop_assert!(close(&(&x * &y).involution(), &(&x.involution() * &y.involution()), l1(&x) * l1(&y)));
    }

    #[test]
    fn body_and_soul_split((n, a) in element(8, None)) {
        let x = build(n, &a);
        let (parity, body, soul) = parity_body(&x);
        prop_assert!(close(&(&soul + &GrassmannElement::constant(n, body)), &x, l1(&x)));
        prop_assert!(soul.body().norm() == 0.0);
        if let Some(p) = parity {
            prop_assert!(x.terms().all(|(m, _)| Parity::of_mask(m) == p));
        }
    }
}
