use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn critshe(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critshe"))
        .args(args)
        .env_remove("CRITSHE_OUT_DIR")
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

/// `name -> (value, stderr, method)` from a result CSV.
fn rows(path: &Path) -> Vec<(String, f64, f64, String)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["name", "value", "stderr", "n_samples", "method", "seed"]
    );
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (
                rec[0].to_string(),
                rec[1].parse().unwrap(),
                rec[2].parse().unwrap(),
                rec[4].to_string(),
            )
        })
        .collect()
}

fn value(rows: &[(String, f64, f64, String)], name: &str) -> f64 {
    rows.iter().find(|r| r.0 == name).unwrap_or_else(|| panic!("no row {name}")).1
}

fn manifest(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn constants_at_the_reference_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = critshe(dir.path(), &["constants", "--d", "3", "--kappa", "0.4"]);
    assert_eq!(out.status.code(), Some(0));
    let r = rows(&dir.path().join("constants.csv"));
    assert_eq!(value(&r, "m0"), 0.0);
    assert_eq!(value(&r, "gamma0"), 1.5);
    assert_eq!(value(&r, "summable"), 1.0);
    let m = manifest(&dir.path().join("constants.manifest.json"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["seed"], "1");
    assert_eq!(m["config"]["kappa"], "0.4");
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn sigma_reports_both_columns_and_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let out = critshe(dir.path(), &["sigma", "--d", "3", "--kappa", "1", "--samples", "200000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&dir.path().join("sigma.csv"));
    let f = r.iter().find(|x| x.0 == "sigma2_fourier").unwrap();
    let m = r.iter().find(|x| x.0 == "sigma2_real_space").unwrap();
    assert_eq!(f.3, "fourier-quad");
    assert_eq!(m.3, "real-space-mc");
    assert!(m.2 > 0.0);
    let pass = r.iter().find(|x| x.0.starts_with("pass:")).unwrap();
    assert_eq!(pass.1, 1.0);
}

#[test]
fn chaos_var_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let out = critshe(
        dir.path(),
        &["chaos-var", "--n", "1", "--d", "3", "--R", "1", "--kappa", "0.4", "--method", "both", "--pairs", "20000"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = rows(&dir.path().join("chaos-var.csv"));
    assert!((value(&r, "variance_fourier") - 2.4155728933).abs() < 1e-8);
    assert!(value(&r, "variance_fk") > 0.0);
    assert!(r.iter().any(|x| x.0.starts_with("pass:fourier and fk agree")));
}

#[test]
fn coupling_outside_the_model_range_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = critshe(dir.path(), &["chaos-var", "--d", "3", "--kappa", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "usage");
    assert!(err["message"].as_str().unwrap().contains("(d-2)/2"));
}

#[test]
fn malformed_invocations_exit_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["frobnicate"],
        vec!["phi", "--rates", "1,x"],
        vec!["lattice", "--replicas", "10"],
        vec!["phi", "--format", "xml"],
        vec!["sigma", "--samples", "notanumber"],
    ] {
        let out = critshe(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["error"], "usage", "{args:?}");
    }
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.conf"), "# phi run\nrates = 1,2,3\nmc_samples = 50000\nseed = 9\n").unwrap();
    let out = critshe(dir.path(), &["phi", "--config", "run.conf", "--seed", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let m = manifest(&dir.path().join("phi.manifest.json"));
    assert_eq!(m["config"]["rates"], "1,2,3");
    assert_eq!(m["config"]["mc-samples"], "50000");
    assert_eq!(m["config"]["seed"], "10");
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    let out = critshe(dir.path(), &["phi", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_directory_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("results");
    let out = Command::new(env!("CARGO_BIN_EXE_critshe"))
        .args(["constants", "--format", "json"])
        .env("CRITSHE_OUT_DIR", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(target.join("constants.json")).unwrap()).unwrap();
    assert_eq!(doc["schema"], "critshe-rows/1");
    assert!(doc["rows"].as_array().unwrap().iter().any(|r| r["name"] == "gamma0"));
    assert!(target.join("constants.manifest.json").exists());
}

#[test]
fn unreliable_estimates_have_their_own_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = critshe(
        dir.path(),
        &["fk-moments", "--x", "0.01,0,0", "--kappa", "0.49", "--paths", "1000"],
    );
    assert_eq!(out.status.code(), Some(3));
    let m = manifest(&dir.path().join("fk-moments.manifest.json"));
    assert_eq!(m["status"], "unreliable");
    assert!(!m["flags"].as_array().unwrap().is_empty());
}

#[test]
fn manifest_replays_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let a = critshe(dir.path(), &["fk-moments", "--paths", "3000", "--seed", "77", "--out-dir", "a"]);
    assert_eq!(a.status.code(), Some(0));
    let b = critshe(
        dir.path(),
        &["fk-moments", "--config", "a/fk-moments.manifest.json", "--out-dir", "b", "--threads", "2"],
    );
    assert_eq!(b.status.code(), Some(0));
    let x = std::fs::read(dir.path().join("a/fk-moments.csv")).unwrap();
    let y = std::fs::read(dir.path().join("b/fk-moments.csv")).unwrap();
    assert_eq!(x, y);
    // a manifest from another subcommand is refused
    let c = critshe(dir.path(), &["phi", "--config", "a/fk-moments.manifest.json"]);
    assert_eq!(c.status.code(), Some(2));
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = critshe(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for s in critshe::cli::SUBCOMMANDS {
        assert!(text.contains(s), "{s}");
    }
}
