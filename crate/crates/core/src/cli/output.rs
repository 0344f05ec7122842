//! Long-format result rows, result files and the run manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{Format, RunConfig};
use crate::error::{Error, Result};
use crate::regimes::RegimeReport;
use crate::rng::StreamKey;
use crate::stats::Estimate;

/// Version tag of the row schema `name,value,stderr,n_samples,method,seed`.
pub const ROW_SCHEMA: &str = "critshe-rows/1";
pub const MANIFEST_SCHEMA: &str = "critshe-manifest/1";

/// One statistic. Verdicts are rows named `pass:<property>` (value 1 or 0)
/// and `margin:<property>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub method: String,
    pub seed: String,
}

pub fn seed_tag(key: &StreamKey) -> String {
    format!("{}:{:016x}", key.seed, key.estimator)
}

impl Row {
    pub fn from_estimate(name: impl Into<String>, e: &Estimate) -> Self {
        Self {
            name: name.into(),
            value: e.value,
            stderr: e.stderr,
            n_samples: e.n_samples,
            method: e.method.tag().to_string(),
            seed: e.seed.as_ref().map(seed_tag).unwrap_or_default(),
        }
    }

    pub fn exact(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            stderr: 0.0,
            n_samples: 1,
            method: "exact".into(),
            seed: String::new(),
        }
    }

    pub fn verdict(property: &str, pass: bool, margin: f64) -> [Self; 2] {
        [
            Self::exact(format!("pass:{property}"), if pass { 1.0 } else { 0.0 }),
            Self::exact(format!("margin:{property}"), margin),
        ]
    }
}

/// Result of one subcommand before it is written out.
#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Vec<Row>,
    /// `(property, pass)` of every tested property.
    pub verdicts: Vec<(String, bool)>,
    /// Estimator reliability flags.
    pub flags: Vec<String>,
    /// Extra files, `(file name, contents)`.
    pub extra: Vec<(String, String)>,
    pub details: Option<Value>,
}

impl Outcome {
    pub fn push(&mut self, name: impl Into<String>, e: &Estimate) {
        self.rows.push(Row::from_estimate(name, e));
    }

    pub fn push_exact(&mut self, name: impl Into<String>, value: f64) {
        self.rows.push(Row::exact(name, value));
    }

    pub fn verdict(&mut self, property: &str, pass: bool, margin: f64) {
        self.rows.extend(Row::verdict(property, pass, margin));
        self.verdicts.push((property.to_string(), pass));
    }

    /// Rows and verdicts of a report; row names are `[prefix/]statistic@label=x`.
    pub fn push_report(&mut self, report: &RegimeReport, prefix: Option<&str>) {
        let pre = prefix.map(|p| format!("{p}/")).unwrap_or_default();
        for r in &report.rows {
            self.push(format!("{pre}{}@{}={}", r.statistic, r.label, r.x), &r.estimate);
        }
        for v in &report.verdicts {
            self.verdict(&format!("{pre}{}", v.property), v.pass, v.margin);
        }
    }

    pub fn failed(&self) -> Vec<&str> {
        self.verdicts
            .iter()
            .filter(|(_, p)| !p)
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Write the result file in the configured format; returns its path.
pub fn write_results(cfg: &RunConfig, format: Format, outcome: &Outcome) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let path = dir.join(format!("{}.{}", cfg.subcommand, format.extension()));
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
            for r in &outcome.rows {
                w.serialize(r).map_err(|e| io_err(&path, e))?;
            }
            w.flush().map_err(|e| io_err(&path, e))?;
        }
        Format::Json => {
            let doc = json!({
                "schema": ROW_SCHEMA,
                "subcommand": cfg.subcommand,
                "rows": outcome.rows,
                "details": outcome.details,
            });
            let text = serde_json::to_string_pretty(&doc).map_err(|e| io_err(&path, e))?;
            std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        }
    }
    Ok(path)
}

pub fn write_extra(cfg: &RunConfig, name: &str, contents: &str) -> Result<PathBuf> {
    let path = cfg.out_dir().join(name);
    std::fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Manifest contents: config echo, seed, version, wall time and status.
pub struct ManifestInfo<'a> {
    pub status: &'a str,
    pub exit_code: i32,
    pub wall_time_s: f64,
    pub outputs: &'a [PathBuf],
    pub flags: &'a [String],
    pub failed: &'a [&'a str],
    pub error: Option<&'a Error>,
}

pub fn write_manifest(cfg: &RunConfig, info: &ManifestInfo) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let path = dir.join(format!("{}.manifest.json", cfg.subcommand));
    let doc = json!({
        "schema": MANIFEST_SCHEMA,
        "subcommand": cfg.subcommand,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.raw("seed"),
        "key_derivation": format!("seed + \"{}/<estimator>\"", cfg.subcommand),
        "config": cfg.values,
        "row_schema": {
            "version": ROW_SCHEMA,
            "columns": ["name", "value", "stderr", "n_samples", "method", "seed"],
        },
        "outputs": info.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "wall_time_s": info.wall_time_s,
        "status": info.status,
        "exit_code": info.exit_code,
        "flags": info.flags,
        "failed_checks": info.failed,
        "error": info.error.map(|e| json!({"class": e.class(), "message": e.to_string()})),
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    Ok(path)
}
