use std::path::PathBuf;

use anyhow::Result;
use clap::Subcommand;
use frobenius_core::super_frobenius::fixtures::lifted_two_pole;
use frobenius_core::super_frobenius::{
    body_reduction, egoroff_chart, ns_representation_check, super_residuals, super_v_operator,
    tnabla_and_metrics, ChartOptions, SuperEquation, SuperPotential, SuperResidueField,
};
use frobenius_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::io::{self, complex, complex_list, SystemFile};
use crate::{complex_arg, psi, GlobalArgs, Status, UsageError};

#[derive(Debug, Subcommand)]
pub enum SuperCommand {
    /// Residuals of an odd potential read from a JSON file.
    Check {
        /// Number of odd coordinates.
        #[arg(long)]
        n: usize,
        /// Potential file: a list of [subset, expression] pairs.
        #[arg(long)]
        psi: PathBuf,
        /// Comma-separated groups: darboux_egoroff, tnabla_flat, flat_identity_e,
        /// flat_identity_eps, euler, orthogonality, tnabla_metrics, v_operator.
        #[arg(long, value_delimiter = ',')]
        which: Option<Vec<String>>,
        /// Base point, one value per coordinate (`--u 1 --u 2,0.5`); defaults to u_a = a.
        #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
        u: Vec<C64>,
        /// Additional random points near the base point.
        #[arg(long, default_value_t = 0)]
        samples: usize,
        /// Weight D for the Euler residuals; only fitted when absent.
        #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
        charge: Option<C64>,
        /// Jet order of the chart.
        #[arg(long, default_value_t = ChartOptions::default().order)]
        order: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Neveu-Schwarz relations of the vector fields, checked as exact polynomial identities.
    Ns {
        /// Number of odd coordinates.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        a_max: i64,
        /// Largest odd index j, standing for j + 1/2.
        #[arg(long, default_value_t = 3)]
        j_max: i64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Body reduction of super-Schlesinger residuals against the classical system.
    Reduce {
        /// System file with `u` and constant `residues`; the two-pole family when absent.
        #[arg(long)]
        residues: Option<PathBuf>,
        /// Parameter of the two-pole family.
        #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
        lambda: f64,
        /// Shift of the two-pole family, `RE` or `RE,IM`.
        #[arg(long, value_parser = complex_arg, allow_hyphen_values = true, default_value = "0.5")]
        kappa: C64,
        /// Evaluation point of the two-pole family.
        #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
        u: Vec<C64>,
        /// Jet order of the expansion.
        #[arg(long, default_value_t = 4)]
        order: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXTRA_GROUPS: [&str; 2] = ["tnabla_metrics", "v_operator"];

fn parse_groups(which: &Option<Vec<String>>) -> Result<(Vec<SuperEquation>, Vec<&'static str>)> {
    let Some(list) = which else {
        return Ok((SuperEquation::ALL.to_vec(), Vec::new()));
    };
    let mut eqs = Vec::new();
    let mut extra = Vec::new();
    for name in list.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        if let Some(eq) = SuperEquation::parse(name) {
            eqs.push(eq);
        } else if let Some(x) = EXTRA_GROUPS.iter().find(|&&x| x == name) {
            extra.push(*x);
        } else {
            return Err(UsageError(format!("unknown residual group {name:?}")).into());
        }
    }
    Ok((eqs, extra))
}

fn sample_points(base: &[C64], samples: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![base.to_vec()];
    for _ in 0..samples {
        points.push(
            base.iter()
                .map(|z| z + C64::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)))
                .collect(),
        );
    }
    points
}

struct PointReport {
    value: Value,
    worst: f64,
}

fn check_point(
    psi: &SuperPotential,
    u: &[C64],
    eqs: &[SuperEquation],
    extra: &[&str],
    charge: Option<C64>,
    order: usize,
    seed: u64,
) -> Result<PointReport> {
    let chart = egoroff_chart(psi, u, &ChartOptions { order })?;
    let res = super_residuals(&chart, charge)?;
    let mut worst: f64 = 0.0;
    let mut residuals = Map::new();
    for &eq in eqs {
        let r = res.get(eq);
        if let Some(r) = r {
            worst = worst.max(r);
        }
        residuals.insert(eq.name().to_string(), json!(r));
    }
    let mut value = json!({
        "u": complex_list(u),
        "eta": complex_list(&chart.eta.iter().map(|e| e.at_point().body()).collect::<Vec<_>>()),
        "fitted_charge": res.fitted_charge.map(complex),
        "residuals": residuals,
    });
    if extra.contains(&"tnabla_metrics") {
        let t = tnabla_and_metrics(&chart, 8, seed)?;
        worst = worst.max(t.max_residual());
        value["tnabla_metrics"] = json!({
            "levi_civita_compatibility": t.levi_civita_compatibility,
            "isotropy": t.isotropy,
            "h_from_g": t.h_from_g,
            "g_tilde_from_g": t.g_tilde_from_g,
            "h_parallel": t.h_parallel,
            "g_tilde_parallel": t.g_tilde_parallel,
            "pi_compat_odd": t.pi_compat_odd,
            "pi_compat_even": t.pi_compat_even,
            "symmetry": t.symmetry,
            "orthogonality": t.orthogonality,
            "frobenius_pairing": t.frobenius_pairing,
            "theta_form": t.theta_form,
            "algebra": t.algebra,
        });
    }
    if extra.contains(&"v_operator") {
        let v = super_v_operator(&chart, charge)?;
        worst = worst.max(v.max_residual());
        value["v_operator"] = json!({
            "charge": complex(v.charge),
            "body": v.matrix.iter().map(|r| r.iter().map(|x| complex(x.body())).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "formula_agreement": v.formula_agreement,
            "h_skew": v.h_skew,
            "epsilon_eigen": v.epsilon_eigen,
            "parallel": v.parallel,
            "pole_identity": v.pole_identity,
        });
    }
    value["max"] = json!(worst);
    Ok(PointReport { value, worst })
}

pub fn run(cmd: &SuperCommand, global: &GlobalArgs) -> Result<Status> {
    match cmd {
        SuperCommand::Check {
            n,
            psi: file,
            which,
            u,
            samples,
            charge,
            order,
            out,
        } => {
            let potential = psi::read_potential(*n, file)?;
            let (eqs, extra) = parse_groups(which)?;
            let base: Vec<C64> = if u.is_empty() {
                (1..=*n).map(|a| C64::new(a as f64, 0.0)).collect()
            } else {
                u.clone()
            };
            if base.len() != *n {
                return Err(UsageError(format!("{} values of --u for n = {n}", base.len())).into());
            }
            let points = sample_points(&base, *samples, global.seed);
            let reports = points
                .par_iter()
                .map(|p| check_point(&potential, p, &eqs, &extra, *charge, *order, global.seed))
                .collect::<Result<Vec<_>>>()?;
            let tol = global.tol_or(1e-9);
            let worst = reports.iter().map(|r| r.worst).fold(0.0, f64::max);
            let passed = worst <= tol;
            io::emit_json(
                out.as_deref(),
                &json!({
                    "n": n,
                    "charge": charge.map(complex),
                    "points": reports.into_iter().map(|r| r.value).collect::<Vec<_>>(),
                    "max": worst,
                    "tol": tol,
                    "passed": passed,
                }),
            )?;
            Ok(Status::from_bool(passed))
        }
        SuperCommand::Ns {
            n,
            a_max,
            j_max,
            out,
        } => {
            if *n == 0 {
                return Err(UsageError("n must be positive".into()).into());
            }
            let r = ns_representation_check(*n, *a_max, *j_max);
            io::emit_json(
                out.as_deref(),
                &json!({
                    "n": r.n,
                    "relations_checked": r.relations_checked,
                    "max_residual": r.max_residual.to_string(),
                    "failures": r.failures,
                    "passed": r.passed(),
                }),
            )?;
            Ok(Status::from_bool(r.passed()))
        }
        SuperCommand::Reduce {
            residues,
            lambda,
            kappa,
            u,
            order,
            out,
        } => {
            let (field, point) = match residues {
                Some(path) => {
                    let file: SystemFile = io::parse_json(path)?;
                    let s = file.build()?;
                    (SuperResidueField::constant(s.residues.clone()), s.u.clone())
                }
                None => {
                    let point = if u.is_empty() {
                        vec![C64::new(0.9, 0.0), C64::new(-0.6, 0.0)]
                    } else {
                        u.clone()
                    };
                    (
                        lifted_two_pole(*lambda, 1.0, *kappa)?.residue_field(),
                        point,
                    )
                }
            };
            let r = body_reduction(&field, &point, *order)?;
            let tol = global.tol_or(1e-12);
            let passed = r.difference <= tol;
            io::emit_json(
                out.as_deref(),
                &json!({
                    "u": complex_list(&point),
                    "super_residual": r.super_residual,
                    "classical_residual": r.classical_residual,
                    "difference": r.difference,
                    "tol": tol,
                    "passed": passed,
                }),
            )?;
            Ok(Status::from_bool(passed))
        }
    }
}
