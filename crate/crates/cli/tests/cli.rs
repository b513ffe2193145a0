use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pusmi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pusmi"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn missing_input_is_config_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = pusmi(
        dir.path(),
        &["estimate", "--input", "does-not-exist.csv", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does-not-exist.csv"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_config_field_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"sed": 1}"#).unwrap();
    let out = pusmi(
        dir.path(),
        &["--config", "c.json", "estimate", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o: &'static str| {
        [
            "--seed", "9", "estimate", "--n-p", "40", "--n-u", "80", "--out", o,
        ]
    };
    let a = pusmi(dir.path(), &args("a"));
    let b = pusmi(dir.path(), &args("b"));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let fa = std::fs::read(dir.path().join("a/estimate.json")).unwrap();
    let fb = std::fs::read(dir.path().join("b/estimate.json")).unwrap();
    assert_eq!(fa, fb);
    assert_eq!(fa, a.stdout);
}

#[test]
fn prior_changes_value_but_not_objective() {
    let dir = tempfile::tempdir().unwrap();
    let run = |prior: &str| {
        stdout_json(&pusmi(
            dir.path(),
            &[
                "--seed",
                "4",
                "--prior",
                prior,
                "estimate",
                "--sample-prior",
                "0.5",
                "--n-p",
                "40",
                "--n-u",
                "80",
                "--out",
                "o",
            ],
        ))
    };
    let lo = run("0.5");
    let hi = run("0.7");
    let j = |v: &Value| v["result"]["j_hat"].as_f64().unwrap();
    let value = |v: &Value| v["result"]["estimate"]["value"].as_f64().unwrap();
    assert_eq!(j(&lo), j(&hi));
    assert!((value(&lo) - value(&hi)).abs() > 1e-6);
    let expected = |theta: f64| theta / (1.0 - theta) * (-j(&lo) - 0.5);
    assert!((value(&lo) - expected(0.5)).abs() < 1e-12);
    assert!((value(&hi) - expected(0.7)).abs() < 1e-12);
}

#[test]
fn fig1_single_point_writes_one_row_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = pusmi(
        dir.path(),
        &[
            "fig1-sweep",
            "--axis",
            "positive",
            "--fixed",
            "60",
            "--grid",
            "30",
            "--trials",
            "2",
            "--out",
            "o",
        ],
    );
    let summary = stdout_json(&out);
    assert_eq!(summary["rows"], 1);
    let csv = std::fs::read_to_string(dir.path().join("o/fig1.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains("mse_mean"));
    let meta: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o/fig1.csv.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["command"], "fig1-sweep");
    assert_eq!(meta["config"]["sweep"]["trials"], 2);
}

#[test]
fn empty_type2_grid_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"type2": {"n_p_grid": []}}"#).unwrap();
    let out = pusmi(
        dir.path(),
        &[
            "--config",
            "c.json",
            "type2-sweep",
            "--trials",
            "2",
            "--b-count",
            "19",
            "--out",
            "o",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o/type2.csv").exists());
}

#[test]
fn type2_sweep_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = pusmi(
        dir.path(),
        &[
            "type2-sweep",
            "--n-p-grid",
            "20,30",
            "--n-u-grid",
            "40",
            "--trials",
            "2",
            "--b-count",
            "19",
            "--out",
            "o",
        ],
    );
    assert_eq!(stdout_json(&out)["rows"], 2);
    let csv = std::fs::read_to_string(dir.path().join("o/type2.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn puit_reports_p_value() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&pusmi(
        dir.path(),
        &[
            "puit",
            "--n-p",
            "30",
            "--n-u",
            "60",
            "--b-count",
            "19",
            "--out",
            "o",
        ],
    ));
    let p = v["result"]["p_value"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
    assert_eq!(v["result"]["permuted"].as_array().unwrap().len(), 19);
}

#[test]
fn purl_toy_is_reproducible_and_zero_epochs_keeps_init() {
    let dir = tempfile::tempdir().unwrap();
    let a = pusmi(
        dir.path(),
        &[
            "purl-toy", "--epochs", "3", "--n-p", "40", "--n-u", "80", "--out", "a",
        ],
    );
    let b = pusmi(
        dir.path(),
        &[
            "purl-toy", "--epochs", "3", "--n-p", "40", "--n-u", "80", "--out", "b",
        ],
    );
    assert_eq!(stdout_json(&a), stdout_json(&b));
    let zero = stdout_json(&pusmi(
        dir.path(),
        &[
            "purl-toy", "--epochs", "0", "--n-p", "40", "--n-u", "80", "--out", "z",
        ],
    ));
    assert_eq!(zero["result"]["best_iteration"], 0);
    let points = std::fs::read_to_string(dir.path().join("a/purl_toy_points.csv")).unwrap();
    assert!(points.starts_with("x1,x2,y,purl,pca"));
}

fn write_corpus(path: &Path, rows: usize, dim: usize) {
    let mut text = String::new();
    for i in 0..rows {
        let label = if i % 2 == 0 { 1 } else { -1 };
        for j in 0..dim {
            let noise = ((i * 31 + j * 17) as f64).sin();
            let shift = if j == 0 { label as f64 } else { 0.0 };
            text.push_str(&format!("{},", noise + shift));
        }
        text.push_str(&format!("{label}\n"));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn purl_train_writes_history() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("corpus.csv"), 400, 30);
    let v = stdout_json(&pusmi(
        dir.path(),
        &[
            "purl-train",
            "--input",
            "corpus.csv",
            "--n-p",
            "40",
            "--n-u",
            "80",
            "--epochs",
            "2",
            "--validation-n-p",
            "20",
            "--validation-n-u",
            "40",
            "--out",
            "o",
        ],
    ));
    assert!(v["best_validation_j"].is_number());
    let history = std::fs::read_to_string(dir.path().join("o/purl_history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 3);
    assert!(dir.path().join("o/purl_model.json").exists());
}

#[test]
fn divergence_is_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let probe = stdout_json(&pusmi(
        dir.path(),
        &["purl-toy", "--epochs", "0", "--out", "p"],
    ));
    let mut purl = probe["config"]["purl"].clone();
    purl["sgd_w"]["learning_rate"] = 1e200.into();
    purl["sgd_v"]["learning_rate"] = 1e200.into();
    purl["epochs"] = 3.into();
    let cfg = serde_json::json!({ "purl": purl });
    std::fs::write(dir.path().join("c.json"), cfg.to_string()).unwrap();
    let out = pusmi(
        dir.path(),
        &["--config", "c.json", "purl-toy", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(3));
}
