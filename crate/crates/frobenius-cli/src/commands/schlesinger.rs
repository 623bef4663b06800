use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Subcommand;
use frobenius_core::linalg::CMat;
use frobenius_core::pr_bridge::closed_forms;
use frobenius_core::schlesinger::{
    check_solution, integrate, monitors, reconstruct_frobenius, tau, CheckOptions,
    IntegrationOptions, Monitors, SchlesingerSystem, StrictMethod,
};
use frobenius_core::C64;
use serde_json::{json, Value};

use crate::io::{self, complex, complex_list, Complex, InitFile, SystemFile};
use crate::{complex_arg, GlobalArgs, Status, UsageError};

#[derive(Debug, Subcommand)]
pub enum SchlesingerCommand {
    /// Special initial data of QH(P^r) at (x0, x1) from the closed forms, as a system file.
    Init {
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
        r: u32,
        #[arg(long, value_parser = complex_arg, allow_hyphen_values = true, default_value = "0")]
        x0: C64,
        #[arg(long, value_parser = complex_arg, allow_hyphen_values = true, default_value = "0")]
        x1: C64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate along a path file; the report holds the endpoint system.
    Integrate {
        /// System file.
        #[arg(long)]
        system: PathBuf,
        /// Path file: a JSON list of waypoints, each a list of positions.
        #[arg(long)]
        path: PathBuf,
        /// JSON-lines trajectory, one record per accepted step.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tau function along a path file.
    Tau {
        /// System file.
        #[arg(long)]
        system: PathBuf,
        /// Path file: a JSON list of waypoints, each a list of positions.
        #[arg(long)]
        path: PathBuf,
        /// Also check closedness of the tau form at the start.
        #[arg(long)]
        closedness: bool,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a system: special, strictly special, identity weight. Exit 1 unless special.
    Check {
        /// System file.
        #[arg(long)]
        system: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover eta from the residues and check it is a potential metric of weight D - 2.
    Reconstruct {
        /// System file.
        #[arg(long)]
        system: PathBuf,
        /// Weight D; read from the system when absent.
        #[arg(long, allow_hyphen_values = true)]
        charge: Option<f64>,
        /// Shift t of A_j + t P_j; chosen automatically when absent.
        #[arg(long, allow_hyphen_values = true)]
        shift: Option<f64>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_system(path: &Path) -> Result<SchlesingerSystem> {
    let file: SystemFile = io::parse_json(path)?;
    file.build()
        .with_context(|| format!("system {}", path.display()))
}

fn monitors_max(a: &Monitors, b: &Monitors) -> Monitors {
    let opt = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, y) => x.or(y),
    };
    Monitors {
        conservation: a.conservation.max(b.conservation),
        rank_defect: opt(a.rank_defect, b.rank_defect),
        idempotency: opt(a.idempotency, b.idempotency),
    }
}

fn max_matrix_deviation(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).iter().fold(0.0f64, |acc, z| acc.max(z.norm())))
        .fold(0.0, f64::max)
}

pub fn run(cmd: &SchlesingerCommand, global: &GlobalArgs) -> Result<Status> {
    match cmd {
        SchlesingerCommand::Init { r, x0, x1, out } => {
            let closed = closed_forms(*r as usize, *x0, *x1)?;
            let data = closed.init_data();
            let n = data.m();
            let file = SystemFile {
                u: closed.u_vec().into_iter().map(Complex::from).collect(),
                init: Some(InitFile {
                    charge: data.charge,
                    eta: data.eta.iter().copied().map(Complex::from).collect(),
                    v: (0..n)
                        .map(|i| (0..n).map(|j| data.v[(i, j)].into()).collect())
                        .collect(),
                }),
                ..SystemFile::default()
            };
            // Fail early if the closed forms do not define special data.
            file.build()?;
            io::emit_json(out.as_deref(), &serde_json::to_value(&file)?)?;
            Ok(Status::Passed)
        }
        SchlesingerCommand::Integrate {
            system,
            path,
            trajectory,
            out,
        } => {
            let s = load_system(system)?;
            let p = io::read_path(path)?;
            let outcome = integrate(&s, &p, &IntegrationOptions::default())?;
            if let Some(t) = trajectory {
                let mut f = std::io::BufWriter::new(
                    std::fs::File::create(t)
                        .with_context(|| format!("cannot create {}", t.display()))?,
                );
                for rec in &outcome.trajectory {
                    writeln!(f, "{}", io::trajectory_line(rec)?)?;
                }
                f.flush()?;
            }
            let worst = outcome
                .trajectory
                .iter()
                .map(|r| r.monitors)
                .fold(monitors(&s), |a, b| monitors_max(&a, &b));
            eprintln!(
                "monitors over {} steps: conservation {:e}, rank defect {:?}, idempotency {:?}",
                outcome.trajectory.len(),
                worst.conservation,
                worst.rank_defect,
                worst.idempotency
            );
            let first = p.waypoints.first().expect("paths have waypoints");
            let last = p.waypoints.last().expect("paths have waypoints");
            let closed = first.iter().zip(last).all(|(a, b)| (a - b).norm() == 0.0);
            let deviation =
                closed.then(|| max_matrix_deviation(&outcome.system.residues, &s.residues));
            io::emit_json(
                out.as_deref(),
                &json!({
                    "closed_path": closed,
                    "start_deviation": deviation,
                    "log_tau": complex(outcome.log_tau),
                    "monitors": io::monitors(&worst),
                    "stats": {
                        "accepted": outcome.stats.accepted,
                        "rejected": outcome.stats.rejected,
                        "evaluations": outcome.stats.evaluations,
                    },
                    "endpoint": SystemFile::from_system(&outcome.system),
                }),
            )?;
            Ok(Status::Passed)
        }
        SchlesingerCommand::Tau {
            system,
            path,
            closedness,
            out,
        } => {
            let s = load_system(system)?;
            let p = io::read_path(path)?;
            let report = tau(&s, &p, &IntegrationOptions::default(), *closedness)?;
            let omega: Vec<Value> = report
                .omega_samples
                .iter()
                .map(|(t, w)| json!([t, complex(*w)]))
                .collect();
            io::emit_json(
                out.as_deref(),
                &json!({
                    "log_tau": complex(report.log_tau),
                    "tau": complex(report.tau),
                    "closedness": report.closedness,
                    "omega": omega,
                }),
            )?;
            Ok(Status::Passed)
        }
        SchlesingerCommand::Check { system, out } => {
            let s = load_system(system)?;
            let opts = CheckOptions {
                tol: global.tol_or(CheckOptions::default().tol),
                ..CheckOptions::default()
            };
            let r = check_solution(&s, &opts);
            let method = r.strict_method.map(|m| match m {
                StrictMethod::InvertibleW => "invertible_w",
                StrictMethod::FiniteDifference => "finite_difference",
            });
            io::emit_json(
                out.as_deref(),
                &json!({
                    "is_special": r.is_special,
                    "is_strict_special": r.is_strict_special,
                    "strict_method": method,
                    "strict_residual": r.strict_residual,
                    "identity_weight": r.identity_weight,
                    "kernel_gap": r.kernel_gap,
                    "orthogonality": r.orthogonality,
                    "w_projection": r.w_projection,
                    "min_residue_norm": r.min_residue_norm,
                    "detail": r.detail,
                }),
            )?;
            Ok(Status::from_bool(r.is_special))
        }
        SchlesingerCommand::Reconstruct {
            system,
            charge,
            shift,
            out,
        } => {
            let s = load_system(system)?;
            let charge = charge.or(s.charge).ok_or_else(|| {
                UsageError("no weight: pass --charge or store `charge` in the system".into())
            })?;
            let e = s
                .identity
                .clone()
                .ok_or_else(|| UsageError("the system carries no identity vector".into()))?;
            let rec =
                reconstruct_frobenius(&s, &e, charge, *shift, &IntegrationOptions::default())?;
            let tol = global.tol_or(1e-6) * rec.derivative_scale.max(1.0);
            let passed = rec.symmetry <= tol && rec.euler <= tol;
            io::emit_json(
                out.as_deref(),
                &json!({
                    "charge": charge,
                    "shift": rec.shift,
                    "eta": complex_list(&rec.eta),
                    "symmetry": rec.symmetry,
                    "euler": rec.euler,
                    "derivative_scale": rec.derivative_scale,
                    "passed": passed,
                }),
            )?;
            Ok(Status::from_bool(passed))
        }
    }
}
