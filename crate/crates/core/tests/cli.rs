mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairprice::dataset::{load_dataset, Schema};
use fairprice::gaussian_eo::{self, fit_eo_fair_linear};
use fairprice::report::audit;
use fairprice::transport::random_repair;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairprice"))
        .args(args)
        .env("FAIRPRICE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Labelled predictions where the protected group a is accepted far less often than b.
fn audit_csv(dir: &TempDir) -> PathBuf {
    let mut text = String::from("group,label,pred,fair_pred\n");
    for i in 0..200 {
        let g = if i % 2 == 0 { "a" } else { "b" };
        let label = u8::from(i % 3 == 0);
        let pred = u8::from(if g == "a" { i % 5 == 0 } else { i % 4 != 0 });
        let fair_pred = u8::from(i % 4 < 2);
        text.push_str(&format!("{g},{label},{pred},{fair_pred}\n"));
    }
    let path = dir.path().join("audit.csv");
    fs::write(&path, text).unwrap();
    path
}

fn features_csv(dir: &TempDir) -> PathBuf {
    let mut rng = common::rng(3);
    let ds = common::gaussian_groups(&mut rng, 400, [[0.0, 1.0], [2.0, -1.0]], [[1.0, 0.5], [0.7, 1.5]]);
    let path = dir.path().join("features.csv");
    ds.save_csv(&path).unwrap();
    path
}

#[test]
fn audit_report_matches_library_and_sets_exit_code() {
    let dir = TempDir::new().unwrap();
    let data = audit_csv(&dir);
    let out = dir.path().join("report.json");
    let base = ["audit", "--data", p(&data), "--sensitive", "group", "--target", "label"];

    let violated = run(&[&base[..], &["--pred", "pred", "--out", p(&out)]].concat());
    assert_eq!(code(&violated), 2, "{}", String::from_utf8_lossy(&violated.stderr));
    assert!(String::from_utf8_lossy(&violated.stderr).contains("disparate impact"));

    let ds = load_dataset(&data, &Schema::new(vec![], "group", Some("label".into()))).unwrap();
    let want = audit(
        &ds.binary_target().unwrap(),
        &ds.column_binary("pred").unwrap(),
        ds.groups(),
        ds.group_labels(),
        None,
        10,
    )
    .unwrap();
    assert_eq!(json_file(&out), serde_json::to_value(&want).unwrap());

    let waived = run(&[&base[..], &["--pred", "pred", "--fail-on", "none"]].concat());
    assert_eq!(code(&waived), 0);
    let stdout: Value = serde_json::from_slice(&waived.stdout).unwrap();
    assert_eq!(stdout, serde_json::to_value(&want).unwrap());

    let fair = run(&[&base[..], &["--pred", "fair_pred"]].concat());
    assert_eq!(code(&fair), 0, "{}", String::from_utf8_lossy(&fair.stderr));
}

#[test]
fn bad_input_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let data = audit_csv(&dir);
    let missing = run(&[
        "audit",
        "--data",
        p(&data),
        "--sensitive",
        "nope",
        "--target",
        "label",
        "--pred",
        "pred",
    ]);
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope"));

    assert_eq!(code(&run(&["audit", "--data", p(&data)])), 1);
    assert_eq!(code(&run(&["no-such-command"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);

    let features = features_csv(&dir);
    let out = dir.path().join("out.csv");
    let bad = run(&[
        "repair",
        "--data",
        p(&features),
        "--sensitive",
        "s",
        "--lambda",
        "1.5",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("lambda"));
    assert!(!out.exists());

    let odd_step = run(&["certify", "--pair", "eo,pp", "--step", "0.3"]);
    assert_eq!(code(&odd_step), 1);
}

#[test]
fn repair_matches_library_and_replays() {
    let dir = TempDir::new().unwrap();
    let data = features_csv(&dir);
    let (out, plan) = (dir.path().join("out.csv"), dir.path().join("plan.json"));
    let args = [
        "repair",
        "--data",
        p(&data),
        "--sensitive",
        "s",
        "--lambda",
        "0.4",
        "--seed",
        "17",
    ];
    let res = run(&[&args[..], &["--out", p(&out), "--plan", p(&plan)]].concat());
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    let schema = Schema::new(vec!["x1".into(), "x2".into()], "s", None);
    let ds = load_dataset(&data, &schema).unwrap();
    let (want, _) = random_repair(&ds, 0.4, 17).unwrap();
    let got = load_dataset(&out, &schema).unwrap();
    assert_eq!(got.features(), want.features());

    let replayed = dir.path().join("replayed.csv");
    let res = run(&[
        "repair",
        "--data",
        p(&data),
        "--sensitive",
        "s",
        "--replay",
        p(&plan),
        "--out",
        p(&replayed),
    ]);
    assert_eq!(code(&res), 0);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&replayed).unwrap());
}

#[test]
fn zero_lambda_leaves_features_unchanged() {
    let dir = TempDir::new().unwrap();
    let data = features_csv(&dir);
    let out = dir.path().join("out.csv");
    let res = run(&[
        "repair",
        "--data",
        p(&data),
        "--sensitive",
        "s",
        "--lambda",
        "0",
        "--seed",
        "1",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&res), 0);
    let schema = Schema::new(vec!["x1".into(), "x2".into()], "s", None);
    assert_eq!(
        load_dataset(&out, &schema).unwrap().features(),
        load_dataset(&data, &schema).unwrap().features()
    );
}

#[test]
fn gaussian_fit_matches_library() {
    let dir = TempDir::new().unwrap();
    let config = gaussian_eo::GaussianConfig::default();
    let (x, s, y) = config.sample(3000, &mut common::rng(4)).unwrap();
    let data = dir.path().join("gauss.csv");
    let ds = common::dataset(
        &[
            ("x1", x[0].clone()),
            ("x2", x[1].clone()),
            ("s", s.clone()),
            ("y", y.clone()),
        ],
        &["x1", "x2"],
        "s",
        Some("y"),
    );
    ds.save_csv(&data).unwrap();

    let res = run(&[
        "fit",
        "--method",
        "gaussian-eo",
        "--data",
        p(&data),
        "--sensitive",
        "s",
        "--target",
        "y",
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let report: Value = serde_json::from_slice(&res.stdout).unwrap();

    let reloaded = load_dataset(
        &data,
        &Schema::new(vec!["x1".into(), "x2".into()], "s", Some("y".into())),
    )
    .unwrap();
    let est = gaussian_eo::estimate_covariance(
        reloaded.features(),
        &reloaded.sensitive_values().unwrap(),
        reloaded.target().unwrap(),
    )
    .unwrap();
    let want = fit_eo_fair_linear(&est.model).unwrap();
    assert_eq!(report["predictor"], serde_json::to_value(&want).unwrap());
    assert!(report["constraint_residual"].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(report["method"], "gaussian-eo");
}

#[test]
fn eo_classifier_fit_reports_small_training_gaps() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("scores.csv");
    common::score_model_data(&mut common::rng(5), 4000, [0.3, 0.6])
        .save_csv(&data)
        .unwrap();
    let out = dir.path().join("fit.json");
    let res = run(&[
        "fit",
        "--method",
        "eo-classifier",
        "--data",
        p(&data),
        "--sensitive",
        "s",
        "--target",
        "y",
        "--tolerance",
        "0.02",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let report = json_file(&out);
    for key in ["train_equalized_odds_tpr_gap", "train_equalized_odds_fpr_gap"] {
        assert!(report[key].as_f64().unwrap().abs() <= 0.05, "{key}: {}", report[key]);
    }
}

#[test]
fn simulate_then_plot_data() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    let res = run(&[
        "simulate",
        "--sizes",
        "50,200",
        "--reps",
        "8",
        "--seed",
        "3",
        "--out-dir",
        p(&sim),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["curve.csv", "replicates.csv", "curve_long.csv", "curve.json"] {
        assert!(sim.join(f).exists(), "{f}");
    }
    let curve = json_file(&sim.join("curve.json"));
    assert_eq!(curve["points"].as_array().unwrap().len(), 2);

    let long = dir.path().join("long.csv");
    let res = run(&["plot-data", "--curve", p(&sim.join("curve.json")), "--out", p(&long)]);
    assert_eq!(code(&res), 0);
    assert_eq!(fs::read(&long).unwrap(), fs::read(sim.join("curve_long.csv")).unwrap());
}

#[test]
fn certify_finds_no_odds_and_predictive_parity_witness() {
    let res = run(&["certify", "--pair", "eo,pp", "--step", "0.1", "--gap", "0.2"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let out: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(out["search"]["certified_empty"], true);
}
