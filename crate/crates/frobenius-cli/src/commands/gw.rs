use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use frobenius_core::gw_recursion::{compute_gw_table, wdvv_residual_exact};

use crate::io;
use crate::{GlobalArgs, Status, UsageError};

#[derive(Debug, Args)]
pub struct GwArgs {
    /// Projective dimension, at least 2.
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    pub r: u32,
    /// Largest degree.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub dmax: u32,
    /// Verify every WDVV identity exactly; exit 1 on a nonzero residual.
    #[arg(long)]
    pub check: bool,
    /// Read the table from this CSV instead of computing it.
    #[arg(long)]
    pub from: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &GwArgs, _global: &GlobalArgs) -> Result<Status> {
    let table = match &args.from {
        Some(path) => {
            let table = io::read_gw_csv(&io::read_text(path)?)?;
            if table.r() != args.r || table.d_max() < args.dmax {
                return Err(UsageError(format!(
                    "{} holds r = {}, d <= {}; asked for r = {}, d <= {}",
                    path.display(),
                    table.r(),
                    table.d_max(),
                    args.r,
                    args.dmax
                ))
                .into());
            }
            table.truncated(args.dmax)
        }
        None => compute_gw_table(args.r, args.dmax)?,
    };
    io::emit(args.out.as_deref(), &io::write_gw_csv(&table)?)?;
    if !args.check {
        return Ok(Status::Passed);
    }
    let residual = wdvv_residual_exact(&table, args.dmax)?;
    if residual.is_zero() {
        eprintln!(
            "wdvv: all identities hold exactly up to degree {}",
            args.dmax
        );
        return Ok(Status::Passed);
    }
    if let Some(w) = &residual.witness {
        eprintln!(
            "wdvv: violated at degree {}, indices {:?}, monomial {:?}, value {}",
            w.degree, w.indices, w.monomial, w.value
        );
    }
    eprintln!("wdvv: max residual {}", residual.max);
    Ok(Status::CheckFailed)
}
