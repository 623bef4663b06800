//! End-to-end acceptance suite. Prints one `PASS`/`FAIL` line per criterion
//! and exits nonzero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use frobenius_core::grassmann::{GrassmannElement, Parity};
use frobenius_core::gw_recursion::{compute_gw_table, wdvv_residual_exact};
use frobenius_core::linalg::CMat;
use frobenius_core::pr_bridge::{closed_forms, cross_validate, spectrum_checks};
use frobenius_core::schlesinger::{
    build_special, integrate, min_gap, monitors, reconstruct_frobenius, tau, tau_closedness,
    IntegrationOptions, IntegrationPath, SchlesingerSystem,
};
use frobenius_core::super_frobenius::fixtures::{
    lifted_two_pole, random_odd_potential, rng, two_point_potential,
};
use frobenius_core::super_frobenius::{
    body_reduction, egoroff_chart, kappa_linearity_frame, ns_representation_check,
    strict_special_super, super_residuals, super_schlesinger_residual, tnabla_and_metrics,
    ChartOptions, SuperEquation, SuperResidueField,
};
use frobenius_core::C64;
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Plane-curve counts from the two-point recursion on P^2, in machine integers.
fn plane_curve_counts(d_max: usize) -> Vec<u128> {
    fn binom(n: u128, k: u128) -> u128 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }
    let mut n = vec![0u128; d_max + 1];
    n[1] = 1;
    for d in 2..=d_max {
        let mut total: i128 = 0;
        for a in 1..d {
            let b = d - a;
            let (ai, bi, di) = (a as u128, b as u128, d as u128);
            let prod = (n[a] * n[b]) as i128;
            let t1 = (ai * ai * bi * bi * binom(3 * di - 4, 3 * ai - 2)) as i128;
            let t2 = (ai * ai * ai * bi * binom(3 * di - 4, 3 * ai - 1)) as i128;
            total += prod * (t1 - t2);
        }
        n[d] = total as u128;
    }
    n
}

/// Standard Young tableaux of the 2x2 shape: lines through four general lines in P^3.
fn lines_meeting_four_lines() -> u64 {
    let hooks = [3u64, 2, 2, 1];
    (1..=4u64).product::<u64>() / hooks.iter().product::<u64>()
}

fn gw_counts() -> Outcome {
    let start = Instant::now();
    let table = compute_gw_table(2, 5).map_err(err)?;
    let elapsed = start.elapsed();
    let oracle = plane_curve_counts(5);
    let mut got = Vec::new();
    for d in 1..=5u32 {
        let k = (3 * d - 1) as usize;
        let value = table
            .value(d, &vec![2; k])
            .cloned()
            .ok_or(format!("missing d={d}"))?;
        if value != BigInt::from(oracle[d as usize]) {
            return Err(format!("d={d}: {value} vs {}", oracle[d as usize]));
        }
        got.push(value.to_string());
    }
    let p3 = compute_gw_table(3, 1).map_err(err)?;
    let a = p3.value(1, &[2, 2, 3]).cloned();
    let b = p3.value(1, &[2, 2, 2, 2]).cloned();
    let want_b = BigInt::from(lines_meeting_four_lines());
    ensure(
        elapsed < Duration::from_secs(5)
            && a == Some(BigInt::from(1))
            && b.as_ref() == Some(&want_b),
        format!(
            "P2 {} in {elapsed:.2?}; P3 (2,2,3)={a:?} (2,2,2,2)={b:?}",
            got.join(",")
        ),
    )
}

fn wdvv_exact() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    for r in [2u32, 3] {
        let table = compute_gw_table(r, 4).map_err(err)?;
        let res = wdvv_residual_exact(&table, 4).map_err(err)?;
        if !res.is_zero() {
            return Err(format!("r={r}: max {} witness {:?}", res.max, res.witness));
        }
        parts.push(format!("r={r} zero"));
    }
    let elapsed = start.elapsed();
    ensure(
        elapsed < Duration::from_secs(30),
        format!("{} in {elapsed:.2?}", parts.join(", ")),
    )
}

fn cross_validation() -> Outcome {
    let mut worst: f64 = 0.0;
    for r in 2..=4 {
        let cv = cross_validate(r, c(0.3, 0.0), c(-0.7, 0.0), 1e-8).map_err(err)?;
        if !cv.passed() {
            return Err(format!(
                "r={r}: deviation {:.3e}, special {}",
                cv.max_deviation(),
                cv.special.is_special
            ));
        }
        worst = worst.max(cv.max_deviation());
    }
    Ok(format!("max deviation {worst:.3e}"))
}

fn spectra() -> Outcome {
    let (mut rows, mut dev): (f64, f64) = (0.0, 0.0);
    for r in 2..=8 {
        let s = spectrum_checks(r).map_err(err)?;
        if s.row_sum_deviation > 1e-12 || s.deviation > 1e-10 || s.contains_zero != (r % 2 == 1) {
            return Err(format!("r={r}: {s:?}"));
        }
        rows = rows.max(s.row_sum_deviation);
        dev = dev.max(s.deviation);
    }
    Ok(format!("row sums {rows:.2e}, spectrum {dev:.2e}"))
}

fn p2_special() -> Result<SchlesingerSystem, String> {
    let closed = closed_forms(2, c(0.3, 0.0), c(-0.7, 0.0)).map_err(err)?;
    build_special(&closed.init_data(), &closed.u_vec()).map_err(err)
}

fn small_loop(s: &SchlesingerSystem) -> IntegrationPath {
    let radius = 0.5 * min_gap(&s.u) / (2.0 * std::f64::consts::PI);
    IntegrationPath::circle(&s.u, 0, radius, 48)
}

fn conservation() -> Outcome {
    let s = p2_special()?;
    let out = integrate(&s, &small_loop(&s), &IntegrationOptions::default()).map_err(err)?;
    let deviation = s
        .residues
        .iter()
        .zip(&out.system.residues)
        .map(|(a, b)| max_abs(&(a - b)))
        .fold(0.0, f64::max);
    let worst = out
        .trajectory
        .iter()
        .map(|t| t.monitors.max())
        .fold(monitors(&out.system).max(), f64::max);
    ensure(
        deviation <= 1e-6 && worst <= 1e-8,
        format!(
            "loop deviation {deviation:.2e}, monitors {worst:.2e}, {} steps",
            out.trajectory.len()
        ),
    )
}

fn reconstruction() -> Outcome {
    let s = p2_special()?;
    let out = integrate(&s, &small_loop(&s), &IntegrationOptions::default()).map_err(err)?;
    let e = s.identity.clone().ok_or("no identity")?;
    let charge = s.charge.ok_or("no charge")?;
    if charge != 0.0 {
        return Err(format!("D = {charge}, expected 0"));
    }
    let mut worst: f64 = 0.0;
    for rec in [
        &out.trajectory[0],
        &out.trajectory[out.trajectory.len() / 2],
    ] {
        let mut at = s.clone();
        at.u = rec.u.clone();
        at.residues = rec.residues.clone();
        let r = reconstruct_frobenius(&at, &e, charge, None, &IntegrationOptions::default())
            .map_err(err)?;
        worst = worst.max(r.symmetry).max(r.euler);
    }
    ensure(
        worst <= 1e-6,
        format!("symmetry/euler {worst:.2e} at start and midpoint"),
    )
}

fn random_matrix(g: &mut ChaCha8Rng, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| {
        c(g.gen_range(-0.5..0.5), g.gen_range(-0.5..0.5))
    })
}

fn tau_function() -> Outcome {
    let opts = IntegrationOptions::default();
    let s = p2_special()?;
    let closed = tau_closedness(&s, &opts).map_err(err)?;

    let target: Vec<C64> =
        s.u.iter()
            .enumerate()
            .map(|(k, z)| z + c(0.05 * k as f64, 0.03))
            .collect();
    let direct = tau(&s, &IntegrationPath::straight(&s.u, &target), &opts, false).map_err(err)?;
    let mid: Vec<C64> =
        s.u.iter()
            .zip(&target)
            .enumerate()
            .map(|(k, (a, b))| (a + b) * 0.5 + c(0.02 * k as f64, -0.04 * k as f64))
            .collect();
    let detour = IntegrationPath::new(vec![s.u.clone(), mid, target.clone()]).map_err(err)?;
    let bent = tau(&s, &detour, &opts, false).map_err(err)?;
    let homotopy = (direct.tau - bent.tau).norm() / direct.tau.norm();

    let mut g = ChaCha8Rng::seed_from_u64(7);
    let pair = vec![random_matrix(&mut g, 3), random_matrix(&mut g, 3)];
    let u0 = vec![c(0.0, 0.0), c(1.0, 0.2)];
    let two =
        SchlesingerSystem::new(u0.clone(), pair.clone(), CMat::identity(3, 3)).map_err(err)?;
    let u1 = vec![c(0.1, -0.3), c(1.6, 0.5)];
    let numeric = tau(&two, &IntegrationPath::straight(&u0, &u1), &opts, false).map_err(err)?;
    let exponent = (&pair[0] * &pair[1]).trace();
    let ratio = (u1[0] - u1[1]) / (u0[0] - u0[1]);
    let exact = (exponent * ratio.ln()).exp();
    let closed_form = (numeric.tau - exact).norm() / exact.norm();

    ensure(
        closed <= 1e-6 && homotopy <= 1e-6 && closed_form <= 1e-8,
        format!("closedness {closed:.2e}, homotopy {homotopy:.2e}, two-pole {closed_form:.2e}"),
    )
}

fn random_element(g: &mut ChaCha8Rng, n: usize, parity: Option<Parity>) -> GrassmannElement {
    let terms: Vec<(u32, C64)> = (0..g.gen_range(1..10))
        .map(|_| {
            (
                g.gen_range(0..1u32 << n),
                c(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)),
            )
        })
        .filter(|(m, _)| parity.is_none_or(|p| Parity::of_mask(*m) == p))
        .collect();
    GrassmannElement::from_terms(n, &c(0.0, 0.0), terms)
}

fn l1(x: &GrassmannElement) -> f64 {
    x.terms().map(|(_, z)| z.norm()).sum::<f64>().max(1.0)
}

fn grassmann_suite() -> Outcome {
    let mut g = ChaCha8Rng::seed_from_u64(2024);
    let one = |n| GrassmannElement::constant(n, c(1.0, 0.0));
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = g.gen_range(1..=8);
        let odd = g.gen_bool(0.5);
        let x = random_element(
            &mut g,
            n,
            Some(if odd { Parity::Odd } else { Parity::Even }),
        );
        let y = random_element(&mut g, n, None);
        let z = random_element(&mut g, n, None);
        let sx = l1(&x) * l1(&y) * l1(&z);
        let assoc = (&(&(&x * &y) * &z) - &(&x * &(&y * &z))).max_abs() / sx;
        let yh = random_element(&mut g, n, Some(Parity::Odd));
        let sign = if odd { -1.0 } else { 1.0 };
        let koszul = (&(&x * &yh) - &(&yh * &x).scale(c(sign, 0.0))).max_abs() / (l1(&x) * l1(&yh));
        let k = g.gen_range(0..n);
        let leibniz = (&(&x * &y).left_derivative(k)
            - &(&(&x.left_derivative(k) * &y) + &(&x * &y.left_derivative(k)).scale(c(sign, 0.0))))
            .max_abs()
            / (l1(&x) * l1(&y));
        let body = c(g.gen_range(0.5..2.0), g.gen_range(-1.0..1.0));
        let w = &y.soul() + &GrassmannElement::constant(n, body);
        let inv = w.inverse().map_err(err)?;
        let inverse = (&(&w * &inv) - &one(n)).max_abs() / (l1(&w) * l1(&inv));
        let e = &x.even_part().soul() + &GrassmannElement::constant(n, body);
        let root = e.sqrt().map_err(err)?;
        let sqrt = (&(&root * &root) - &e).max_abs() / l1(&root).powi(2);
        worst = worst
            .max(assoc)
            .max(koszul)
            .max(leibniz)
            .max(inverse)
            .max(sqrt);
    }
    ensure(
        worst <= 1e-12,
        format!("1000 samples, n <= 8, worst relative residual {worst:.2e}"),
    )
}

fn neveu_schwarz() -> Outcome {
    let report = ns_representation_check(3, 4, 3);
    ensure(
        report.passed(),
        format!(
            "{} relations, max residual {}, failures {:?}",
            report.relations_checked,
            report.max_residual,
            report.failures.first()
        ),
    )
}

fn super_identities() -> Outcome {
    let mut g = rng(100);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let (psi, u) = random_odd_potential(3, &mut g);
        let chart = egoroff_chart(&psi, &u, &ChartOptions::default()).map_err(err)?;
        let t = tnabla_and_metrics(&chart, 4, k).map_err(err)?;
        let r = super_residuals(&chart, None).map_err(err)?;
        worst = [
            t.h_parallel,
            t.g_tilde_parallel,
            t.isotropy,
            t.frobenius_pairing,
            r.anticommutator,
        ]
        .into_iter()
        .fold(worst, f64::max);
    }
    ensure(
        worst <= 1e-9,
        format!("100 potentials, n = 3, worst {worst:.2e}"),
    )
}

fn super_schlesinger() -> Outcome {
    let constant = SuperResidueField::constant(vec![
        CMat::from_fn(2, 2, |i, j| c((i + 2 * j) as f64, 0.5 * i as f64)),
        CMat::from_fn(2, 2, |i, j| c(1.0 - j as f64, (i * j) as f64)),
        CMat::from_fn(2, 2, |i, j| c(-0.5 * (i + j) as f64, 0.25)),
    ]);
    let body =
        body_reduction(&constant, &[c(0.0, 0.0), c(1.0, 0.3), c(-1.2, 0.7)], 2).map_err(err)?;

    let mut kappa: f64 = 0.0;
    let mut flow: f64 = 0.0;
    let samples = vec![
        vec![c(0.9, 0.0), c(-0.6, 0.0)],
        vec![c(0.4, 0.1), c(-1.1, 0.0)],
    ];
    for (lambda, k) in [(0.35, 0.5), (0.2, -1.3), (0.4, 2.0)] {
        let sys = lifted_two_pole(lambda, 1.0, c(k, 0.0)).map_err(err)?;
        let report = strict_special_super(&sys, &samples, 4).map_err(err)?;
        kappa = kappa.max(report.kappa.linear);
        flow = flow.max(
            super_schlesinger_residual(&sys.residue_field(), &samples[0], 4)
                .map_err(err)?
                .max_residual(),
        );
    }
    let mut frame: f64 = 0.0;
    for charge in [0.0, 0.7, 1.5] {
        let psi = two_point_potential(c(0.8, 0.1), charge, [c(0.0, 0.0), c(0.0, 0.0)]);
        let chart = egoroff_chart(&psi, &[c(0.3, 0.0), c(-0.9, 0.0)], &ChartOptions::default())
            .map_err(err)?;
        kappa = kappa.max(
            kappa_linearity_frame(&chart, c(charge, 0.0))
                .map_err(err)?
                .linear,
        );
        let r = super_residuals(&chart, Some(c(charge, 0.0))).map_err(err)?;
        for eq in [SuperEquation::TnablaFlat, SuperEquation::DarbouxEgoroff] {
            frame = frame.max(r.get(eq).unwrap_or(0.0));
        }
    }
    ensure(
        body.difference == 0.0 && kappa <= 1e-10 && frame <= 1e-9 && flow <= 1e-9,
        format!(
            "body difference {}, kappa-linear {kappa:.2e}, fixture frame {frame:.2e}, flow {flow:.2e}",
            body.difference
        ),
    )
}

fn run_cli(args: &[&str], dir: &Path) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_frobenius"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(err)?;
    if !out.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let d = dir.path();
    let gw: Vec<Vec<u8>> = (0..2)
        .map(|_| run_cli(&["gw", "--r", "2", "--dmax", "4"], d))
        .collect::<Result<_, _>>()?;
    let system = run_cli(
        &[
            "schlesinger",
            "init",
            "--r",
            "2",
            "--x0",
            "0.3",
            "--x1",
            "-0.7",
        ],
        d,
    )?;
    std::fs::write(d.join("system.json"), &system).map_err(err)?;
    let parsed: serde_json::Value = serde_json::from_slice(&system).map_err(err)?;
    let start = parsed["u"].clone();
    let mut end = start.clone();
    end[0][0] = serde_json::json!(start[0][0].as_f64().unwrap_or(0.0) + 0.05);
    std::fs::write(
        d.join("path.json"),
        serde_json::to_vec(&serde_json::json!([start, end])).map_err(err)?,
    )
    .map_err(err)?;
    let mut runs = Vec::new();
    for k in 0..2 {
        let traj = format!("traj{k}.jsonl");
        let report = run_cli(
            &[
                "schlesinger",
                "integrate",
                "--system",
                "system.json",
                "--path",
                "path.json",
                "--trajectory",
                &traj,
            ],
            d,
        )?;
        runs.push((report, std::fs::read(d.join(&traj)).map_err(err)?));
    }
    ensure(
        gw[0] == gw[1] && runs[0] == runs[1] && !runs[0].1.is_empty(),
        format!(
            "gw csv {} bytes, trajectory {} bytes, both identical",
            gw[0].len(),
            runs[0].1.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("gw counts", gw_counts),
        ("wdvv exact", wdvv_exact),
        ("closed-form cross validation", cross_validation),
        ("identity sums and spectra", spectra),
        ("schlesinger conservation", conservation),
        ("frobenius reconstruction", reconstruction),
        ("tau function", tau_function),
        ("grassmann kernel", grassmann_suite),
        ("neveu-schwarz relations", neveu_schwarz),
        ("unconditional super identities", super_identities),
        ("super-schlesinger", super_schlesinger),
        ("cli determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{elapsed:.2?}]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{elapsed:.2?}]", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
