//! Command-line front end for `frobenius-core`.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or parse error,
//! 3 numeric abort. Data goes to stdout or `--out`; diagnostics go to stderr.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use frobenius_core::C64;

pub mod commands;
pub mod io;
pub mod psi;

/// Malformed input: bad flags, unreadable files, grammar errors.
#[derive(Debug, Clone)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Passed,
    CheckFailed,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Passed
        } else {
            Status::CheckFailed
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "frobenius",
    version,
    about = "Frobenius (super)manifolds and Schlesinger systems",
    args_override_self = true
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct GlobalArgs {
    /// Tolerance for pass/fail decisions; each command has its own default.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON object whose keys mirror long flags; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

impl GlobalArgs {
    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gromov-Witten numbers of P^r as CSV.
    Gw(commands::gw::GwArgs),
    /// Schlesinger systems: initial data, integration, tau, classification, reconstruction.
    #[command(subcommand)]
    Schlesinger(commands::schlesinger::SchlesingerCommand),
    /// Closed forms for quantum cohomology of P^r.
    #[command(subcommand)]
    Pr(commands::pr::PrCommand),
    /// Frobenius supermanifolds and super-Schlesinger systems.
    #[command(subcommand, name = "super")]
    Super(commands::super_cmd::SuperCommand),
}

/// Parses a complex flag value `RE` or `RE,IM`.
pub fn complex_arg(s: &str) -> std::result::Result<C64, String> {
    io::parse_complex(s)
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    if let Some(e) = err.downcast_ref::<frobenius_core::Error>() {
        use frobenius_core::Error as E;
        return match e {
            E::InvalidParameter(_) | E::InvalidData(_) | E::InvalidModel(_) | E::Parity(_) => 2,
            _ => 3,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some()
        || err.downcast_ref::<serde_json::Error>().is_some()
        || err.downcast_ref::<csv::Error>().is_some()
    {
        return 2;
    }
    3
}

/// Splices flags from `--config FILE` into the argument list.
fn with_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let strings: Vec<String> = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let mut path = None;
    for (k, a) in strings.iter().enumerate() {
        if a == "--config" {
            path = strings.get(k + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(args) };
    let config: serde_json::Value = io::parse_json(std::path::Path::new(&path))?;
    let extra = io::config_args(&config, &strings)?;
    let mut out = args;
    out.extend(extra.into_iter().map(OsString::from));
    Ok(out)
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match with_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: thread pool already configured: {e}");
        }
    }
    match commands::dispatch(&cli) {
        Ok(Status::Passed) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
