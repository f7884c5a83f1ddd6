use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use symnoise_cli::render::Heatmap;

fn symnoise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symnoise"))
        .args(args)
        .env_remove("SYMNOISE_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// Small, quick two-qubit run.
const SMALL: &str = r#"{"tfim": {"n": 2}, "trajectories": 64, "checkpoints": 4}"#;

#[test]
fn scenario_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.json", SMALL);
    let out = dir.path().join("run");
    let res = symnoise(&["scenario", "figure2b", "--config", &cfg, "--seed", "5", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for file in ["config.json", "report.json", "heatmap.csv", "heatmap.svg", "heatmap_fff.csv", "heatmap_fff.svg"] {
        assert!(out.join(file).exists(), "{file} missing");
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["provenance"]["master_seed"], 5);
    assert_eq!(report["provenance"]["trajectories"], 64);
    assert_eq!(report["provenance"]["n"], 2);
    assert!(report["provenance"]["tau"].as_f64().unwrap() > 0.0);
    for key in ["monte_carlo", "fff", "comparison"] {
        assert!(report.get(key).is_some(), "{key} missing");
    }
    let csv = fs::read_to_string(out.join("heatmap.csv")).unwrap();
    let map = Heatmap::from_csv(&csv).unwrap();
    assert_eq!(map.dim(), 4);
    assert!(csv.lines().nth(1).unwrap().starts_with("state,"));
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.json", SMALL);
    let mut reports = Vec::new();
    for threads in ["1", "2"] {
        let out = dir.path().join(format!("t{threads}"));
        let res =
            symnoise(&["simulate", "figure2a", "--config", &cfg, "--threads", threads, "--out", out.to_str().unwrap()]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        reports.push((fs::read(out.join("report.json")).unwrap(), fs::read(out.join("heatmap.csv")).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn chain_couplings_beyond_two_qubits_are_an_invariant_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "chain.json", r#"{"tfim": {"n": 3, "couplings": {"kind": "chain", "j": 1.0}}, "trajectories": 8}"#);
    let res = symnoise(&["scenario", "figure2a", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let bad_json = write_config(dir.path(), "bad.json", "{ not json");
    let zero = write_config(dir.path(), "zero.json", r#"{"trajectories": 0}"#);
    let nyquist = write_config(dir.path(), "dt.json", r#"{"tfim": {"dt": 5.0}}"#);
    for args in [
        vec!["scenario", "figure2a", "--config", bad_json.as_str(), "--out", out],
        vec!["scenario", "figure2a", "--config", zero.as_str(), "--out", out],
        vec!["scenario", "figure2a", "--config", nyquist.as_str(), "--out", out],
        vec!["scenario", "figure9", "--out", out],
        vec!["scenario", "figure2a", "--n", "9", "--out", out],
        vec!["render", "missing.csv"],
    ] {
        let res = symnoise(&args);
        assert_eq!(res.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&res.stderr));
    }
}

#[test]
fn render_reproduces_the_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.json", SMALL);
    let out = dir.path().join("run");
    let res = symnoise(&["fff", "figure2a", "--config", &cfg, "--scale", "log", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = out.join("heatmap_fff.csv");
    let svg = dir.path().join("again.svg");
    let res = symnoise(&["render", csv.to_str().unwrap(), "--scale", "log", "--out", svg.to_str().unwrap()]);
    assert!(res.status.success());
    assert_eq!(fs::read(&svg).unwrap(), fs::read(out.join("heatmap_fff.svg")).unwrap());
}

#[test]
fn basis_command_lists_sectors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("basis.json");
    let res = symnoise(&["basis", "--n", "3", "--out", path.to_str().unwrap()]);
    assert!(res.status.success());
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("63 generators"));
    assert!(text.contains("multiplicity 4 (symmetric)"));
    let doc: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert!(doc.is_object());
}

#[test]
fn noise_check_reports_the_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nc");
    let res = symnoise(&["noise-check", "-m", "200", "--steps", "256", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("noise_check.json")).unwrap()).unwrap();
    let ratio = report["band_ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 0.2, "band ratio {ratio}");
    assert!(out.join("psd.csv").exists());
}
