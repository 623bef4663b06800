use std::path::PathBuf;

use anyhow::Result;
use clap::Subcommand;
use frobenius_core::pr_bridge::{cross_validate, spectrum_checks};
use frobenius_core::C64;
use serde_json::json;

use crate::io::{self, complex, complex_list};
use crate::{complex_arg, GlobalArgs, Status};

#[derive(Debug, Subcommand)]
pub enum PrCommand {
    /// Compare the numeric chart with the closed forms at (x0, x1).
    Verify {
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
    /// Spectrum of W and the identity row sums.
    Spectrum {
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
        r: u32,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cmd: &PrCommand, global: &GlobalArgs) -> Result<Status> {
    match cmd {
        PrCommand::Verify { r, x0, x1, out } => {
            let tol = global.tol_or(1e-8);
            let report = cross_validate(*r as usize, *x0, *x1, tol)?;
            let passed = report.passed();
            io::emit_json(
                out.as_deref(),
                &json!({
                    "r": r,
                    "x0": complex(*x0),
                    "x1": complex(*x1),
                    "permutation": report.permutation,
                    "u_dev": report.u_deviation,
                    "eta_dev": report.eta_deviation,
                    "v_dev": report.v_deviation,
                    "eta_derivative_dev": report.eta_derivative_deviation,
                    "special_ok": report.special.is_special,
                    "tol": tol,
                    "passed": passed,
                }),
            )?;
            Ok(Status::from_bool(passed))
        }
        PrCommand::Spectrum { r, out } => {
            let tol = global.tol_or(1e-10);
            let s = spectrum_checks(*r as usize)?;
            let passed =
                s.deviation <= tol && s.row_sum_deviation <= tol && s.contains_zero == (r % 2 == 1);
            io::emit_json(
                out.as_deref(),
                &json!({
                    "r": r,
                    "eigenvalues": complex_list(&s.eigenvalues),
                    "expected": s.expected,
                    "deviation": s.deviation,
                    "contains_zero": s.contains_zero,
                    "row_sum_deviation": s.row_sum_deviation,
                    "passed": passed,
                }),
            )?;
            Ok(Status::from_bool(passed))
        }
    }
}
