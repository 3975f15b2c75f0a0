use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sepdist::protocol::{run_protocol, ProtocolConfig, Variant, STAGE_AFTER_AC};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sepdist"));
    c.env_remove("SEPDIST_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn reference(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../reference").join(name).display().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn p(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

fn same_files(a: &Path, b: &Path, names: &[&str]) {
    for n in names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n} differs");
    }
}

#[test]
fn run_protocol_without_squeezing_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["run-protocol", "--r", "0", "--out", p(dir.path())]);
    let csv = fs::read_to_string(dir.path().join("criterion.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("g,var_x_norm,var_p_norm,product"));
    let rows: Vec<f64> = lines.map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(rows.len(), 200);
    assert!(rows.iter().all(|v| (v - 1.0).abs() < 1e-9));
}

#[test]
fn run_protocol_gain_window() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["run-protocol", "--r", "0.5", "--loss", "0.5", "--out", p(dir.path())]);
    let t = json(&dir.path().join("trace.json"));
    let g = t["trace"]["optimum"]["g_opt"].as_f64().unwrap();
    let prod = t["trace"]["optimum"]["point"]["product"].as_f64().unwrap();
    assert!((0.35..=0.65).contains(&g), "{g}");
    assert!(prod < 1.0);
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(m["command"], "run-protocol");
}

#[test]
fn run_protocol_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let flags = ["run-protocol", "--r", "0.7", "--variant", "a-posteriori", "--seed", "5"];
    ok(&[&flags[..], &["--out", p(a.path())]].concat());
    ok(&[&flags[..], &["--out", p(b.path()), "--threads", "3"]].concat());
    same_files(a.path(), b.path(), &["trace.json", "criterion.csv", "manifest.json"]);
}

#[test]
fn seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--r", "0.5", "--n-outer", "4", "--n-inner", "4", "--out", p(dir.path())])
        .env("SEPDIST_SEED", "42")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(json(&dir.path().join("samples.json"))["seed"], 42);
}

#[test]
fn analyze_reference_matrices() {
    let out = ok(&["analyze", &reference("gamma_ac.json"), "--ppt", "--mode", "1"]);
    let v = stdout_json(&out);
    let ev = floats(&v["eigenvalues"]);
    for (got, want) in ev.iter().zip([39.84, 28.47, 13.85, 9.371]) {
        assert!((got / want - 1.0).abs() < 5e-3, "{got} vs {want}");
    }
    assert!((v["eigenvalue_sum"].as_f64().unwrap() - 91.53).abs() < 0.01);
    assert!(v.get("product").is_none());

    let v = stdout_json(&ok(&["analyze", &reference("gamma_ab.json"), "--ppt", "--mode", "1"]));
    for (got, want) in floats(&v["eigenvalues"]).iter().zip([28.24, 21.79, 8.646, 5.756]) {
        assert!((got / want - 1.0).abs() < 5e-3, "{got} vs {want}");
    }
}

#[test]
fn analyze_runs_all_checks_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verdict.json");
    let v = stdout_json(&ok(&["analyze", &reference("gamma_ab.json"), "--out", out.to_str().unwrap()]));
    for key in ["eigenvalues", "product", "physical", "classical"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["entangled_by_product"], false);
    assert_eq!(json(&out), v);
    assert!(dir.path().join("verdict.manifest.json").exists());
}

#[test]
fn analyze_identity_physicality() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("id.json");
    fs::write(&f, r#"{"gamma": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}"#).unwrap();
    let v = stdout_json(&ok(&["analyze", f.to_str().unwrap(), "--physical"]));
    assert!(v["physical_min_eigenvalue"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(v["physical"], true);
}

#[test]
fn analyze_rejects_malformed_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("asym.json", r#"{"gamma": [[1,0.5],[0,1]]}"#),
        ("odd.json", r#"{"gamma": [[1,0,0],[0,1,0],[0,0,1]]}"#),
        ("ragged.json", r#"{"gamma": [[1,0],[0]]}"#),
        ("schema.json", r#"{"schema_version": 99, "gamma": [[1,0],[0,1]]}"#),
    ];
    for (name, body) in cases {
        let f = dir.path().join(name);
        fs::write(&f, body).unwrap();
        let out = run(&["analyze", f.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    let out = run(&["analyze", "/nonexistent/state.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/state.json"));
}

#[test]
fn dephase_reference_inputs() {
    for reading in ["square-degrees", "std-dev-degrees"] {
        let v = stdout_json(&ok(&[
            "dephase",
            &reference("gamma_ac.json"),
            "--invert",
            "--d=-0.208,9.876,13.32,1.78",
            "--phase-noise-deg",
            "0.02",
            "--reading",
            reading,
            "--T",
            "0.49",
        ]));
        assert_eq!(v["physical"], true);
        assert_eq!(v["classical"], true);
        assert!(floats(&v["gamma_eigenvalues"]).iter().all(|&e| e > 1.0));
    }
}

#[test]
fn dephase_zero_noise_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inv = dir.path().join("inv.json");
    let fwd = dir.path().join("fwd.json");
    let src = reference("gamma_ac.json");
    ok(&["dephase", &src, "--invert", "--d=-0.208,9.876,13.32,1.78", "--sigma2", "0", "--T", "0.49", "--out", inv.to_str().unwrap()]);
    ok(&["dephase", inv.to_str().unwrap(), "--forward", "--sigma2", "0", "--T", "0.49", "--out", fwd.to_str().unwrap()]);
    let orig = sepdist::io::read_state(Path::new(&src)).unwrap();
    let back = sepdist::io::read_state(&fwd).unwrap();
    assert!(back.gamma().max_abs_diff(orig.gamma()) < 1e-9);
    let d = floats(&json(&fwd)["mean"]);
    for (a, b) in d.iter().zip([-0.208, 9.876, 13.32, 1.78]) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn dephase_usage_errors() {
    let src = reference("gamma_ac.json");
    let missing_d = run(&["dephase", &src, "--invert", "--sigma2", "0.01"]);
    assert_eq!(missing_d.status.code(), Some(2));
    let unit_t = run(&["dephase", &src, "--invert", "--d=0,0,0,0", "--sigma2", "0.01", "--T", "1"]);
    assert_eq!(unit_t.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unit_t.stderr).contains("invalid argument"));
    let no_dir = run(&["dephase", &src, "--sigma2", "0.01"]);
    assert_eq!(no_dir.status.code(), Some(2));
}

fn simulate_into(dir: &Path, extra: &[&str]) {
    let base = ["simulate", "--r", "0.5", "--n-outer", "20", "--n-inner", "50", "--seed", "11", "--out", p(dir)];
    ok(&[&base[..], extra].concat());
}

#[test]
fn simulate_then_tomography_matches_analytic() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path(), &["--sampling", "grid"]);
    let csv = dir.path().join("samples.csv");
    ok(&["tomography", csv.to_str().unwrap(), "--pair", "ac", "--out", p(dir.path())]);
    let t = json(&dir.path().join("tomography.json"));
    assert_eq!(t["n"], 20_000);
    let trace = run_protocol(&ProtocolConfig::new(0.5, Variant::DisplaceBBeforeBs)).unwrap();
    let after = trace.stages.iter().find(|s| s.stage == STAGE_AFTER_AC).unwrap();
    let analytic = after.state.reduce(&[0, 2]).unwrap().gamma().clone();
    let gamma: Vec<Vec<f64>> = t["gamma"].as_array().unwrap().iter().map(floats).collect();
    let err: Vec<Vec<f64>> = t["errors"]["block_std"].as_array().unwrap().iter().map(floats).collect();
    for i in 0..4 {
        for j in 0..4 {
            assert!((gamma[i][j] - analytic[(i, j)]).abs() <= 3.0 * err[i][j], "({i},{j})");
        }
    }
    let txt = fs::read_to_string(dir.path().join("tomography.txt")).unwrap();
    assert_eq!(txt.lines().filter(|l| l.matches('±').count() == 4).count(), 4, "{txt}");
}

#[test]
fn tomography_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path(), &[]);
    let csv = dir.path().join("samples.csv");
    let side = dir.path().join("samples.json");
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "record,cell,cell_x,cell_p,mode,quadrature,value\n").unwrap();
    let out = run(&["tomography", empty.to_str().unwrap(), "--sidecar", side.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let mut doc = json(&side);
    doc["schema_version"] = Value::from(99);
    let bad_side = dir.path().join("future.json");
    fs::write(&bad_side, doc.to_string()).unwrap();
    let out = run(&["tomography", csv.to_str().unwrap(), "--sidecar", bad_side.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema_version"));

    let out = run(&["tomography", csv.to_str().unwrap(), "--settings", "0,0;90,90", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("settings do not determine"));
}

#[test]
fn simulate_and_tomography_independent_of_threads() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let flags = ["simulate", "--r", "0.5", "--variant", "a-posteriori", "--correct", "--n-outer", "30", "--n-inner", "40"];
    ok(&[&flags[..], &["--threads", "1", "--out", p(a.path())]].concat());
    ok(&[&flags[..], &["--threads", "4", "--out", p(b.path())]].concat());
    same_files(a.path(), b.path(), &["samples.csv", "samples.json", "manifest.json"]);

    let csv = a.path().join("samples.csv");
    let (ta, tb) = (a.path().join("t"), b.path().join("t"));
    ok(&["--threads", "1", "tomography", csv.to_str().unwrap(), "--pair", "ab", "--out", p(&ta)]);
    ok(&["--threads", "4", "tomography", csv.to_str().unwrap(), "--pair", "ab", "--out", p(&tb)]);
    same_files(&ta, &tb, &["tomography.json", "tomography.txt", "manifest.json"]);
}

#[test]
fn report_reproduces_reference_numbers() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["report", "--out", p(dir.path())]);
    let path: PathBuf = dir.path().join("report.json");
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.contains("39.8") && text.contains("28.24"));
    assert!(dir.path().join("report.manifest.json").exists());
}
