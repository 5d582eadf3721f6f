//! Report envelope shared by every command, with JSON and plain-text output.
//!
//! Reports hold no timestamps or host paths, so identical inputs produce
//! byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::curvefile::CurveFile;
use crate::{CliError, ExitStatus};

pub const TOOL: &str = "diffinc";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Grids a command ran on.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GridInfo {
    /// Parameter samples of the curve scan or factorization.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter_n: Option<usize>,
    /// Spatial cells per axis, one entry per resolution.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub spatial_n: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_margin: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: String,
    pub status: &'static str,
    pub exit_code: i32,
    pub curve_hash: String,
    pub curve: CurveFile,
    pub grid: GridInfo,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: Option<u64>,
    pub body: Value,
}

impl Report {
    pub fn new(
        command: &str,
        curve: &CurveFile,
        grid: GridInfo,
        tolerances: &[(&str, f64)],
        seed: Option<u64>,
    ) -> Self {
        Report {
            tool: TOOL,
            version: VERSION,
            core_version: diffinc_core::VERSION,
            command: command.into(),
            status: ExitStatus::Ok.label(),
            exit_code: 0,
            curve_hash: curve.hash(),
            curve: curve.clone(),
            grid,
            tolerances: tolerances
                .iter()
                .map(|&(k, v)| (k.to_string(), v))
                .collect(),
            seed,
            body: Value::Null,
        }
    }

    pub fn set_status(&mut self, s: ExitStatus) {
        self.status = s.label();
        self.exit_code = s.code();
    }

    pub fn set_body<T: Serialize>(&mut self, body: &T) {
        self.body = serde_json::to_value(body).expect("report bodies serialize");
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn to_text(&self) -> String {
        let v = serde_json::to_value(self).expect("reports serialize");
        let mut out = String::new();
        render(&v, 0, &mut out);
        out
    }

    /// Writes `<stem>.json` and `<stem>.txt` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, CliError> {
        let json = dir.join(format!("{stem}.json"));
        let text = dir.join(format!("{stem}.txt"));
        std::fs::write(&json, self.to_json()).map_err(|e| CliError::io(&json, e))?;
        std::fs::write(&text, self.to_text()).map_err(|e| CliError::io(&text, e))?;
        Ok(vec![json, text])
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(a)
            if a.iter()
                .all(|x| matches!(x, Value::Number(_) | Value::Null | Value::Bool(_))) =>
        {
            Some(format!(
                "[{}]",
                a.iter().filter_map(scalar).collect::<Vec<_>>().join(", ")
            ))
        }
        _ => None,
    }
}

fn render(v: &Value, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                match scalar(x) {
                    Some(s) => {
                        let _ = writeln!(out, "{pad}{k}: {s}");
                    }
                    None => {
                        let _ = writeln!(out, "{pad}{k}:");
                        render(x, depth + 1, out);
                    }
                }
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                match scalar(x) {
                    Some(s) => {
                        let _ = writeln!(out, "{pad}- {s}");
                    }
                    None => {
                        let _ = writeln!(out, "{pad}[{i}]");
                        render(x, depth + 1, out);
                    }
                }
            }
        }
        other => {
            let _ = writeln!(out, "{pad}{}", scalar(other).unwrap_or_default());
        }
    }
}

/// Writes a CSV table with a header row.
pub fn write_table<R: Serialize>(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = R>,
) -> Result<(), CliError> {
    let err = |source| CliError::Csv {
        path: path.into(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
