//! Metrics, tables, plot series and arrays produced by an experiment, and
//! the files they are written to.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::svg;

/// How a metric value is judged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "threshold", rename_all = "snake_case")]
pub enum Check {
    AtMost(f64),
    AtLeast(f64),
    Equals(f64),
    /// Reported only.
    Info,
}

impl Check {
    pub fn passes(&self, value: f64) -> bool {
        match *self {
            Check::AtMost(t) => value <= t,
            Check::AtLeast(t) => value >= t,
            Check::Equals(t) => value == t,
            Check::Info => true,
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Check::AtMost(_) => "<=",
            Check::AtLeast(_) => ">=",
            Check::Equals(_) => "==",
            Check::Info => "",
        }
    }

    fn threshold(&self) -> Option<f64> {
        match *self {
            Check::AtMost(t) | Check::AtLeast(t) | Check::Equals(t) => Some(t),
            Check::Info => None,
        }
    }

    fn with_threshold(self, t: f64) -> Check {
        match self {
            Check::AtMost(_) => Check::AtMost(t),
            Check::AtLeast(_) => Check::AtLeast(t),
            Check::Equals(_) => Check::Equals(t),
            Check::Info => Check::Info,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub check: Check,
    pub pass: bool,
    pub note: String,
    /// Wall-clock measurements; kept out of `metrics.csv` so that file is
    /// reproducible bit for bit, and written to `timings.csv` instead.
    pub volatile: bool,
}

impl Metric {
    pub fn new(name: &str, value: f64, check: Check) -> Self {
        Self { name: name.to_string(), value, check, pass: check.passes(value), note: String::new(), volatile: false }
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

/// Builds metrics, applying threshold overrides from the configuration.
pub struct Metrics<'a> {
    overrides: &'a BTreeMap<String, f64>,
    pub list: Vec<Metric>,
}

impl<'a> Metrics<'a> {
    pub fn new(overrides: &'a BTreeMap<String, f64>) -> Self {
        Self { overrides, list: Vec::new() }
    }

    pub fn push(&mut self, name: &str, value: f64, check: Check, note: impl Into<String>) {
        let check = self.overrides.get(name).map_or(check, |&t| check.with_threshold(t));
        self.list.push(Metric::new(name, value, check).note(note));
    }

    pub fn at_most(&mut self, name: &str, value: f64, limit: f64, note: impl Into<String>) {
        self.push(name, value, Check::AtMost(limit), note);
    }

    pub fn at_least(&mut self, name: &str, value: f64, limit: f64, note: impl Into<String>) {
        self.push(name, value, Check::AtLeast(limit), note);
    }

    /// A yes/no property stored as 1 (holds) or 0.
    pub fn flag(&mut self, name: &str, holds: bool, note: impl Into<String>) {
        self.push(name, if holds { 1.0 } else { 0.0 }, Check::Equals(1.0), note);
    }

    /// A wall-clock limit in seconds.
    pub fn seconds(&mut self, name: &str, value: f64, limit: f64, note: impl Into<String>) {
        self.push(name, value, Check::AtMost(limit), note);
        if let Some(last) = self.list.last_mut() {
            last.volatile = true;
        }
    }

    pub fn info(&mut self, name: &str, value: f64, note: impl Into<String>) {
        self.push(name, value, Check::Info, note);
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        self.rows.push(cells.into_iter().collect());
    }
}

/// Lines sharing one set of axes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<(String, Vec<(f64, f64)>)>,
    pub log_y: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArrayOut {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
    /// Written next to the array as `<name>.json`.
    pub meta: Option<serde_json::Value>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub metrics: Vec<Metric>,
    pub tables: Vec<Table>,
    pub series: Vec<Series>,
    pub arrays: Vec<ArrayOut>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.metrics.iter().all(|m| m.pass)
    }

    pub fn failing(&self) -> Vec<&Metric> {
        self.metrics.iter().filter(|m| !m.pass).collect()
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    seed: u64,
    version: &'a str,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

fn metrics_csv<'a>(metrics: impl Iterator<Item = &'a Metric>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "value", "comparison", "threshold", "pass", "note"])?;
    for m in metrics {
        w.write_record([
            m.name.clone(),
            format!("{:e}", m.value),
            m.check.symbol().to_string(),
            m.check.threshold().map_or(String::new(), |t| format!("{t:e}")),
            m.pass.to_string(),
            m.note.clone(),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn table_csv(t: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.header)?;
    for r in &t.rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Writes every output of `outcome` into `dir` followed by `manifest.json`
/// with the hashes of the configuration and of each file written.
pub fn write_outputs(
    dir: &Path,
    experiment: &str,
    seed: u64,
    config: (&str, &str),
    outcome: &Outcome,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    files.push(("metrics.csv".into(), metrics_csv(outcome.metrics.iter().filter(|m| !m.volatile))?));
    if outcome.metrics.iter().any(|m| m.volatile) {
        files.push(("timings.csv".into(), metrics_csv(outcome.metrics.iter().filter(|m| m.volatile))?));
    }
    files.push(("metrics.svg".into(), svg::metric_chart(&outcome.metrics).into_bytes()));
    for m in &outcome.metrics {
        files.push((format!("metric_{}.svg", m.name), svg::metric_chart(std::slice::from_ref(m)).into_bytes()));
    }
    for t in &outcome.tables {
        files.push((format!("{}.csv", t.name), table_csv(t)?));
    }
    for s in &outcome.series {
        files.push((format!("{}.svg", s.name), svg::line_plot(s).into_bytes()));
    }
    for a in &outcome.arrays {
        files.push((format!("{}.bslb", a.name), bslab_core::arrayio::encode(&a.dims, &a.values)?));
        if let Some(meta) = &a.meta {
            files.push((format!("{}.json", a.name), serde_json::to_vec_pretty(meta)?));
        }
    }
    let mut written = Vec::new();
    let mut outputs = Vec::new();
    for (name, bytes) in &files {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        outputs.push(FileHash { path: name.clone(), sha256: sha256_hex(bytes) });
        written.push(path);
    }
    let manifest = Manifest {
        experiment,
        seed,
        version: env!("CARGO_PKG_VERSION"),
        inputs: vec![FileHash { path: config.0.to_string(), sha256: sha256_hex(config.1.as_bytes()) }],
        outputs,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?)?;
    written.push(path);
    Ok(written)
}
