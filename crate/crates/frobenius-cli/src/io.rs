//! File formats: complex numbers as `[re, im]`, GW tables as CSV, paths and
//! systems as JSON, trajectories as JSON lines.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use frobenius_core::gw_recursion::{GwKey, GwTable};
use frobenius_core::linalg::{CMat, CVec};
use frobenius_core::schlesinger::{
    build_special, IntegrationPath, Monitors, PoleSign, SchlesingerSystem, SpecialInitData,
    TrajectoryRecord,
};
use frobenius_core::C64;
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::UsageError;

/// A complex number on the wire.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Complex(pub f64, pub f64);

impl From<C64> for Complex {
    fn from(z: C64) -> Self {
        Complex(z.re, z.im)
    }
}

impl From<Complex> for C64 {
    fn from(z: Complex) -> Self {
        C64::new(z.0, z.1)
    }
}

pub fn complex(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn complex_list(zs: &[C64]) -> Value {
    Value::Array(zs.iter().copied().map(complex).collect())
}

/// A matrix as an array of rows.
pub fn matrix(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex(m[(i, j)])).collect()))
            .collect(),
    )
}

/// A matrix flattened in row-major order.
pub fn matrix_row_major(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| complex(m[(i, j)])))
            .collect(),
    )
}

pub fn to_c64s(zs: &[Complex]) -> Vec<C64> {
    zs.iter().copied().map(C64::from).collect()
}

pub fn to_matrix(rows: &[Vec<Complex>]) -> Result<CMat> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        bail!(UsageError(format!(
            "matrix must be square, got {n} rows of lengths {:?}",
            rows.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    Ok(CMat::from_fn(n, n, |i, j| rows[i][j].into()))
}

/// Parses `RE` or `RE,IM`.
pub fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| {
        t.parse::<f64>()
            .map_err(|e| format!("bad number {t:?}: {e}"))
    };
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected RE or RE,IM, got {s:?}")),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    std::fs::File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))?
        .read_to_string(&mut s)
        .with_context(|| format!("cannot read {}", path.display()))?;
    Ok(s)
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| anyhow!(UsageError(format!("{}: {e}", path.display()))))
}

/// Writes to `out` if given, otherwise to stdout.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => {
            std::fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

pub fn emit_json(out: Option<&Path>, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, text.as_bytes())
}

/// CSV with header `r,d,a_multiset,value`, rows in key order.
pub fn write_gw_csv(table: &GwTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r", "d", "a_multiset", "value"])?;
    for (key, value) in table.iter() {
        w.write_record([
            table.r().to_string(),
            key.degree().to_string(),
            key.label(),
            value.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| anyhow!("csv: {e}"))
}

pub fn read_gw_csv(text: &str) -> Result<GwTable> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["r", "d", "a_multiset", "value"] {
        bail!(UsageError(format!("unexpected GW header {header:?}")));
    }
    let mut r = None;
    let mut d_max = 0;
    let mut entries = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let bad = |what: &str| UsageError(format!("row {}: bad {what}", line + 2));
        let row_r: u32 = record[0].parse().map_err(|_| bad("r"))?;
        if *r.get_or_insert(row_r) != row_r {
            bail!(bad("r (mixed dimensions)"));
        }
        let d: u32 = record[1].parse().map_err(|_| bad("d"))?;
        let insertions = record[2]
            .split('-')
            .map(str::parse)
            .collect::<Result<Vec<u32>, _>>()
            .map_err(|_| bad("a_multiset"))?;
        let value: BigInt = record[3].parse().map_err(|_| bad("value"))?;
        d_max = d_max.max(d);
        entries.push((GwKey::new(row_r, d, insertions)?, value));
    }
    let r = r.ok_or_else(|| UsageError("empty GW table".into()))?;
    Ok(GwTable::from_entries(r, d_max, entries)?)
}

pub fn read_path(path: &Path) -> Result<IntegrationPath> {
    let waypoints: Vec<Vec<Complex>> = parse_json(path)?;
    Ok(IntegrationPath::new(
        waypoints.iter().map(|w| to_c64s(w)).collect(),
    )?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InitFile {
    pub charge: f64,
    pub eta: Vec<Complex>,
    /// `v[i][j]`, the coefficient of `e_j` in `V(e_i)`.
    pub v: Vec<Vec<Complex>>,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SignFile {
    #[default]
    Minus,
    Plus,
}

/// A Schlesinger system, either from special initial data or from explicit residues.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub u: Vec<Complex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residues: Option<Vec<Vec<Vec<Complex>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<Complex>>>,
    #[serde(default)]
    pub sign: SignFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<Vec<Complex>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge: Option<f64>,
    #[serde(default)]
    pub special: bool,
}

impl SystemFile {
    pub fn build(&self) -> Result<SchlesingerSystem> {
        let u = to_c64s(&self.u);
        if let Some(init) = &self.init {
            if self.residues.is_some() {
                bail!(UsageError(
                    "give either `init` or `residues`, not both".into()
                ));
            }
            let data = SpecialInitData {
                charge: init.charge,
                eta: to_c64s(&init.eta),
                v: to_matrix(&init.v)?,
            };
            return Ok(build_special(&data, &u)?);
        }
        let residues = self
            .residues
            .as_ref()
            .ok_or_else(|| UsageError("system needs `init` or `residues`".into()))?
            .iter()
            .map(|a| to_matrix(a))
            .collect::<Result<Vec<_>>>()?;
        let dim = residues.first().map_or(0, CMat::nrows);
        let metric = match &self.metric {
            Some(g) => to_matrix(g)?,
            None => CMat::identity(dim, dim),
        };
        let mut s = SchlesingerSystem::new(u, residues, metric)?;
        s.sign = match self.sign {
            SignFile::Minus => PoleSign::Minus,
            SignFile::Plus => PoleSign::Plus,
        };
        s.identity = self.identity.as_ref().map(|e| CVec::from_vec(to_c64s(e)));
        s.charge = self.charge;
        s.special = self.special;
        Ok(s)
    }

    /// The explicit form of a system, suitable for feeding back in.
    pub fn from_system(s: &SchlesingerSystem) -> Self {
        let rows = |m: &CMat| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect())
                .collect()
        };
        SystemFile {
            u: s.u.iter().copied().map(Complex::from).collect(),
            init: None,
            residues: Some(s.residues.iter().map(rows).collect()),
            metric: Some(rows(&s.metric)),
            sign: match s.sign {
                PoleSign::Minus => SignFile::Minus,
                PoleSign::Plus => SignFile::Plus,
            },
            identity: s
                .identity
                .as_ref()
                .map(|e| e.iter().copied().map(Complex::from).collect()),
            charge: s.charge,
            special: s.special,
        }
    }
}

pub fn monitors(m: &Monitors) -> Value {
    json!({
        "conservation": m.conservation,
        "rank_defect": m.rank_defect,
        "idempotency": m.idempotency,
    })
}

/// One JSON-lines record of a trajectory.
pub fn trajectory_line(rec: &TrajectoryRecord) -> Result<String> {
    let value = json!({
        "t": rec.t,
        "u": complex_list(&rec.u),
        "A": rec.residues.iter().map(matrix_row_major).collect::<Vec<_>>(),
        "monitors": monitors(&rec.monitors),
    });
    Ok(serde_json::to_string(&value)?)
}

/// Expands a JSON config object into long flags, skipping flags given explicitly.
pub fn config_args(config: &Value, explicit: &[String]) -> Result<Vec<String>> {
    let obj = config
        .as_object()
        .ok_or_else(|| UsageError("config must be a JSON object".into()))?;
    let mut out = Vec::new();
    for (key, value) in obj {
        let flag = format!("--{key}");
        if explicit
            .iter()
            .any(|a| a == &flag || a.starts_with(&format!("{flag}=")))
        {
            continue;
        }
        match value {
            Value::Bool(true) => out.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Number(x) => out.push(format!("{flag}={x}")),
            Value::String(s) => out.push(format!("{flag}={s}")),
            Value::Array(items) => {
                for item in items {
                    match item {
                        Value::Number(x) => out.push(format!("{flag}={x}")),
                        Value::String(s) => out.push(format!("{flag}={s}")),
                        _ => bail!(UsageError(format!(
                            "config key {key}: only numbers and strings in lists"
                        ))),
                    }
                }
            }
            Value::Object(_) => bail!(UsageError(format!(
                "config key {key}: nested objects are not flags"
            ))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use frobenius_core::gw_recursion::compute_gw_table;

    #[test]
    fn complex_flags() {
        assert_eq!(parse_complex("0").unwrap(), C64::new(0.0, 0.0));
        assert_eq!(parse_complex("0.3,-0.7").unwrap(), C64::new(0.3, -0.7));
        assert!(parse_complex("1,2,3").is_err());
        assert!(parse_complex("x").is_err());
    }

    #[test]
    fn gw_csv_round_trip_is_exact() {
        let table = compute_gw_table(3, 3).unwrap();
        let bytes = write_gw_csv(&table).unwrap();
        let back = read_gw_csv(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(write_gw_csv(&back).unwrap(), bytes);
        assert_eq!(back.len(), table.len());
    }

    #[test]
    fn config_respects_explicit_flags() {
        let cfg = json!({"r": 2, "dmax": 5, "check": true, "quiet": false});
        let args = config_args(&cfg, &["--r".to_string(), "3".to_string()]).unwrap();
        assert_eq!(args, vec!["--check".to_string(), "--dmax=5".to_string()]);
    }

    #[test]
    fn system_file_round_trip() {
        let text = r#"{"u": [[0,0],[1,0]], "residues": [[[[0.5,0],[0,0]],[[0,0],[0,0]]], [[[0,0],[0,0]],[[0,0],[-0.5,0]]]]}"#;
        let file: SystemFile = serde_json::from_str(text).unwrap();
        let s = file.build().unwrap();
        assert_eq!(s.m(), 2);
        let again = SystemFile::from_system(&s).build().unwrap();
        assert_eq!(again.residues, s.residues);
        assert!(serde_json::from_str::<SystemFile>(r#"{"u": [], "bogus": 1}"#).is_err());
    }
}
