//! End-to-end runs of the `dpr` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dpr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpr")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SOLVE: &str = r#"{
    "seed": 11,
    "instance": {"k": 6, "layer_dims": [60, 240], "m": 120},
    "solver": {"step_size": 1.0, "max_iters": 2000, "restarts": 3}
}"#;

fn run_ok(args: &[&str]) -> String {
    let out = dpr(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn solve_writes_trace_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SOLVE);
    let out = dir.path().join("run");
    let stdout = run_ok(&["solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "1"]);
    assert!(stdout.starts_with("solve: rel_err="), "{stdout}");

    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,f,grad_norm,negated,rel_latent_err\n"));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["result"]["rel_err"].as_f64().unwrap() < 1e-2);
    assert_eq!(summary["meta"]["config"]["seed"], 11);
    assert!(summary["meta"]["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["artifacts"], serde_json::json!(["trace.csv", "summary.json"]));
    assert_eq!(manifest["meta"]["config"]["kind"], "solve");
}

#[test]
fn identical_runs_give_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SOLVE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&["solve", "--config", &cfg, "--out", a.to_str().unwrap()]);
    run_ok(&["solve", "--config", &cfg, "--out", b.to_str().unwrap(), "--workers", "1"]);
    for name in ["trace.csv", "summary.json"] {
        let read = |dir: &Path| fs::read_to_string(dir.join(name)).unwrap();
        assert!(read(&a) == read(&b), "{name} differs");
    }
    let c = dir.path().join("c");
    run_ok(&["solve", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "12"]);
    assert!(fs::read(a.join("trace.csv")).unwrap() != fs::read(c.join("trace.csv")).unwrap());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let no_seed = write_config(dir.path(), r#"{"instance": {"k": 2, "layer_dims": [5, 10], "m": 4}}"#);
    assert_eq!(dpr(&["solve", "--config", &no_seed, "--out", out]).status.code(), Some(2));
    assert_eq!(dpr(&["solve", "--config", &no_seed, "--out", out, "--seed", "1"]).status.code(), Some(0));
    let bad_dims = write_config(dir.path(), r#"{"seed": 1, "instance": {"k": 4, "layer_dims": [3], "m": 4}}"#);
    assert_eq!(dpr(&["solve", "--config", &bad_dims, "--out", out]).status.code(), Some(2));
    let garbage = write_config(dir.path(), "not json");
    assert_eq!(dpr(&["sweep", "--config", &garbage, "--out", out]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(dpr(&["sweep", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn landscape_grid_and_critical_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"seed": 2, "instance": {"k": 2, "layer_dims": [50, 200], "m": 100}, "resolution": 21}"#,
    );
    let out = dir.path().join("l");
    run_ok(&["landscape", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let csv = fs::read_to_string(out.join("landscape.csv")).unwrap();
    assert!(csv.starts_with("x1,x2,F,f,h_norm,v_norm\n"));
    assert_eq!(csv.lines().count(), 21 * 21);
    let cp: Value = serde_json::from_str(&fs::read_to_string(out.join("critical_points.json")).unwrap()).unwrap();
    assert_eq!(cp["result"]["points"].as_array().unwrap().len(), 3);
}

#[test]
fn tessellate_and_verify_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"seed": 4, "m_grid": [3, 5, 8], "probes": 2000,
            "instance": {"k": 2, "layer_dims": [40, 160], "m": 80}, "samples": 30}"#,
    );
    let out = dir.path().join("t");
    let out = out.to_str().unwrap();
    let line = run_ok(&["tessellate", "--config", &cfg, "--out", out]);
    assert_eq!(line.trim(), "tessellate: ell=2 counts m=3:6 m=5:10 m=8:16");
    let tess = fs::read_to_string(Path::new(out).join("tessellate.csv")).unwrap();
    assert!(tess.starts_with("m,ell,count,exact,region_formula,bound\n"));

    run_ok(&["verify-wdc", "--config", &cfg, "--out", out]);
    let wdc: Value = serde_json::from_str(&fs::read_to_string(Path::new(out).join("wdc.json")).unwrap()).unwrap();
    assert!(wdc["result"]["wdc_layer2"]["p95"].as_f64().unwrap() > 0.0);
    run_ok(&["verify-rrcp", "--config", &cfg, "--out", out]);
    let csv = fs::read_to_string(Path::new(out).join("rrcp.csv")).unwrap();
    assert!(csv.starts_with("label,stat,value\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 5);
}

#[test]
fn sweep_and_compare_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"seed": 5, "m_grid": [2, 60], "trials": 2,
            "instance": {"k": 3, "layer_dims": [30, 120], "m": 1},
            "solver": {"step_size": 1.0, "max_iters": 500, "restarts": 2},
            "sparse": {"sparsity": 3, "iters": 200}}"#,
    );
    let out = dir.path().join("s");
    let out = out.to_str().unwrap();
    run_ok(&["sweep", "--config", &cfg, "--out", out]);
    let sweep = fs::read_to_string(Path::new(out).join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("m,success_rate,mean_rel_err,trials\n"));
    assert_eq!(sweep.lines().count(), 3);
    run_ok(&["compare", "--config", &cfg, "--out", out]);
    let cmp = fs::read_to_string(Path::new(out).join("compare.csv")).unwrap();
    assert!(cmp.starts_with("m,algo,mean_err,success_rate,trials\n"));
    assert_eq!(cmp.lines().count(), 5);
}
