//! CSV report rows and run manifests.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// One `dataset,estimator,metric,value` row.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub estimator: String,
    pub metric: String,
    pub value: f64,
}

impl ReportRow {
    pub fn new(dataset: &str, estimator: impl Into<String>, metric: impl Into<String>, value: f64) -> Self {
        ReportRow { dataset: dataset.to_string(), estimator: estimator.into(), metric: metric.into(), value }
    }
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Values use Rust's shortest round-trip formatting, so equal numbers always
/// print identically.
pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("dataset,estimator,metric,value\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", field(&r.dataset), field(&r.estimator), field(&r.metric), r.value);
    }
    out
}

/// `key = value` lines describing a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.push("tool", concat!("offpolicy ", env!("CARGO_PKG_VERSION")));
        m.push("command", command);
        m
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}
