//! Flat run configuration: built-in defaults, then a config file, then flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::params::{check_coupling, ModelParams};
use crate::rng::Parallelism;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CRITSHE_OUT_DIR";

/// Smallest accepted value of each budget key.
pub const BUDGET_MINIMA: &[(&str, usize)] = &[
    ("samples", 1_000),
    ("pairs", 1_000),
    ("paths-per-pair", 1),
    ("paths", 1_000),
    ("ks-paths", 1_000),
    ("exp-paths", 1_000),
    ("mc-samples", 10_000),
    ("replicas", 100),
    ("base-steps", 64),
];

const DEFAULT_TAUS: &str = "100,215.44346900318845,464.15888336127773,1000,2154.4346900318824,4641.588833612777,10000";

fn subcommand_defaults(sub: &str) -> Option<Vec<(&'static str, &'static str)>> {
    let v = match sub {
        "sigma" => vec![("d", "3"), ("kappa", "1"), ("samples", "10000000")],
        "chaos-var" => vec![
            ("n", "1"),
            ("d", "3"),
            ("kappa", "0.4"),
            ("t", "1"),
            ("R", "1"),
            ("method", "both"),
            ("pairs", "100000"),
            ("paths-per-pair", "1"),
            ("mc-samples", "1000000"),
            ("base-steps", "1024"),
        ],
        "phi" => vec![("rates", "0.5,1,2,4"), ("mc-samples", "1000000"), ("chain-k", "1")],
        "fk-moments" => vec![
            ("x", "1,0,0"),
            ("t", "1"),
            ("n-max", "4"),
            ("kappa", "0.4"),
            ("paths", "100000"),
            ("base-steps", "1024"),
        ],
        "scaling-check" => vec![
            ("d", "3"),
            ("kappa", "0.4"),
            ("t", "1"),
            ("R", "1"),
            ("eps", "0.25,1"),
            ("pairs", "100000"),
            ("ks-paths", "100000"),
            ("base-steps", "1024"),
        ],
        "clt-table" => vec![
            ("d", "3"),
            ("kappa", "0.4"),
            ("r-list", "1,2,4,8,16,32,64"),
            ("mc-samples", "1000000"),
        ],
        "extinction" => vec![
            ("d", "3"),
            ("kappa", "0.4"),
            ("taus", DEFAULT_TAUS),
            ("exp-paths", "100000"),
            ("pairs", "100000"),
            ("base-steps", "1024"),
        ],
        "lattice" => vec![
            ("grid", "128"),
            ("spacing", "1"),
            ("dt", "auto"),
            ("kappa", "0.4"),
            ("replicas", "200"),
            ("scheme", "exponential-euler"),
            ("dump", "false"),
        ],
        "constants" => vec![("d", "3"), ("kappa", "0.4")],
        _ => return None,
    };
    Some(v)
}

/// Names of every subcommand, in help order.
pub const SUBCOMMANDS: [&str; 9] = [
    "sigma",
    "chaos-var",
    "phi",
    "fk-moments",
    "scaling-check",
    "clt-table",
    "extinction",
    "lattice",
    "constants",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

/// Merged settings of one run. Every key has a default, so the map is
/// always complete and doubles as the manifest's config echo.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: String,
    pub values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Defaults for `sub`, with the output directory taken from `env_out_dir`.
    pub fn defaults(sub: &str, env_out_dir: Option<&str>) -> Result<Self> {
        let Some(own) = subcommand_defaults(sub) else {
            return usage(format!("unknown subcommand {sub}"));
        };
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
        let mut values: BTreeMap<String, String> = own
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        values.insert("seed".into(), "1".into());
        values.insert("threads".into(), threads.to_string());
        values.insert("format".into(), "csv".into());
        values.insert("out-dir".into(), env_out_dir.unwrap_or(".").to_string());
        Ok(Self {
            subcommand: sub.to_string(),
            values,
        })
    }

    /// Override one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = key.trim().replace('_', "-");
        match self.values.get_mut(&key) {
            Some(slot) => {
                *slot = value.into().trim().to_string();
                Ok(())
            }
            None => usage(format!("unknown setting '{key}' for subcommand {}", self.subcommand)),
        }
    }

    /// Apply a config file: flat `key=value` lines, or a JSON object (a run
    /// manifest's `config` object is used when present).
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| Error::Usage(format!("bad JSON config {}: {e}", path.display())))?;
            if let Some(sub) = v.get("subcommand").and_then(Value::as_str) {
                if sub != self.subcommand {
                    return usage(format!("config was written by '{sub}', not '{}'", self.subcommand));
                }
            }
            let obj = v.get("config").unwrap_or(&v);
            let Some(map) = obj.as_object() else {
                return usage("JSON config must be an object");
            };
            for (k, val) in map {
                let s = match val {
                    Value::String(s) => s.clone(),
                    Value::Number(n) => n.to_string(),
                    Value::Bool(b) => b.to_string(),
                    _ => return usage(format!("setting '{k}' must be a scalar")),
                };
                self.set(k, s)?;
            }
            return Ok(());
        }
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("{}:{}: expected key=value", path.display(), i + 1));
            };
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.raw(key)
            .parse()
            .or_else(|e| usage(format!("setting '{key}': cannot parse '{}': {e}", self.raw(key))))
    }

    /// Comma-separated list of reals.
    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        self.raw(key)
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .or_else(|e| usage(format!("setting '{key}': bad entry '{p}': {e}")))
            })
            .collect()
    }

    /// A budget key checked against [`BUDGET_MINIMA`].
    pub fn budget(&self, key: &str) -> Result<usize> {
        let v: usize = self.get(key)?;
        if let Some((_, min)) = BUDGET_MINIMA.iter().find(|(k, _)| *k == key) {
            if v < *min {
                return usage(format!("budget '{key}' = {v} is below the minimum {min}"));
            }
        }
        Ok(v)
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        self.get(key)
    }

    pub fn seed(&self) -> Result<u64> {
        self.get("seed")
    }

    pub fn parallelism(&self) -> Result<Parallelism> {
        let t: usize = self.get("threads")?;
        if t == 0 {
            return usage("threads must be at least 1");
        }
        Ok(Parallelism(t))
    }

    pub fn format(&self) -> Result<Format> {
        match self.raw("format") {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => usage(format!("format must be csv or json, got '{other}'")),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out-dir"))
    }

    /// Model parameters from `d`, `kappa`, `t`, `R` (the last two default to 1
    /// when the subcommand has no such keys).
    pub fn model_params(&self) -> Result<ModelParams> {
        let d: usize = self.get("d")?;
        let kappa: f64 = self.get("kappa")?;
        let t = if self.values.contains_key("t") { self.get("t")? } else { 1.0 };
        let r = if self.values.contains_key("R") { self.get("R")? } else { 1.0 };
        ModelParams::new(d, kappa, t, r).map_err(|e| Error::Usage(strip_domain(e)))
    }

    /// `kappa` checked against the coupling range in dimension `d`.
    pub fn coupling(&self, d: usize) -> Result<f64> {
        let kappa: f64 = self.get("kappa")?;
        check_coupling(d, kappa).map_err(|e| Error::Usage(strip_domain(e)))?;
        Ok(kappa)
    }
}

fn strip_domain(e: Error) -> String {
    match e {
        Error::Domain(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_subcommand_has_defaults() {
        for s in SUBCOMMANDS {
            let c = RunConfig::defaults(s, None).unwrap();
            assert_eq!(c.raw("seed"), "1");
            assert_eq!(c.raw("out-dir"), ".");
        }
        assert!(RunConfig::defaults("nope", None).is_err());
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        std::fs::write(&p, "# sweep\nkappa = 0.3\nmc_samples=20000\n").unwrap();
        let mut c = RunConfig::defaults("clt-table", Some("/tmp/x")).unwrap();
        c.apply_file(&p).unwrap();
        assert_eq!(c.get::<f64>("kappa").unwrap(), 0.3);
        assert_eq!(c.budget("mc-samples").unwrap(), 20_000);
        c.set("kappa", "0.2").unwrap();
        assert_eq!(c.get::<f64>("kappa").unwrap(), 0.2);
        assert_eq!(c.out_dir(), PathBuf::from("/tmp/x"));
        assert!(c.set("rates", "1").is_err());
    }

    #[test]
    fn manifest_config_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(&p, r#"{"subcommand":"constants","config":{"d":"5","kappa":1.25}}"#).unwrap();
        let mut c = RunConfig::defaults("constants", None).unwrap();
        c.apply_file(&p).unwrap();
        assert_eq!(c.raw("d"), "5");
        assert_eq!(c.raw("kappa"), "1.25");
        let mut other = RunConfig::defaults("sigma", None).unwrap();
        assert!(matches!(other.apply_file(&p), Err(Error::Usage(_))));
    }

    #[test]
    fn coupling_violation_is_a_usage_error() {
        let mut c = RunConfig::defaults("chaos-var", None).unwrap();
        c.set("kappa", "0.5").unwrap();
        match c.model_params() {
            Err(Error::Usage(m)) => assert!(m.contains("(d-2)/2"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn budgets_below_minimum_are_rejected() {
        let mut c = RunConfig::defaults("lattice", None).unwrap();
        c.set("replicas", "10").unwrap();
        assert!(c.budget("replicas").is_err());
    }
}
