use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use seqscm::mocks;
use seqscm::scorer::TabularScoreTable;
use seqscm::spec::bundled;
use tempfile::TempDir;

fn seqscm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqscm")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_table(dir: &Path, name: &str, table: &TabularScoreTable) -> String {
    let path = dir.join(name);
    fs::write(&path, table.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&seqscm(&[])), 1);
    assert_eq!(code(&seqscm(&["sample", "--spec", "bundled:marathon_g1", "--n", "3", "--scorer", "uniform"])), 1);
    assert_eq!(code(&seqscm(&["--workers", "0", "validate", "bundled:marathon_g1"])), 1);
    assert_eq!(code(&seqscm(&["--help"])), 0);
}

#[test]
fn validation_failures_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.scm.json");
    fs::write(&bad, r#"{"name": "x", "variables": [], "edges": [["a", "b"]]}"#).unwrap();
    let out = seqscm(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let ok = seqscm(&["validate", "bundled:marathon_g1", "bundled:breast_cancer"]);
    assert_eq!(code(&ok), 0);
    assert_eq!(stdout(&ok).lines().count(), 2);
}

#[test]
fn scorer_failures_exit_with_three() {
    let out = seqscm(&[
        "--seed",
        "1",
        "--scorer",
        "remote:http://127.0.0.1:9/v1/completions",
        "sample",
        "--spec",
        "bundled:marathon_g1",
        "--n",
        "1",
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn interventional_sampling_fixes_the_variable() {
    let out = seqscm(&[
        "--seed",
        "4",
        "--scorer",
        "mock:peaked",
        "sample",
        "--spec",
        "bundled:marathon_g1",
        "--mode",
        "do",
        "--set",
        "g=1",
        "--n",
        "100",
    ]);
    assert_eq!(code(&out), 0);
    let mut rows = csv::Reader::from_reader(out.stdout.as_slice());
    let header = rows.headers().unwrap().clone();
    let g = header.iter().position(|h| h == "g").unwrap();
    let records: Vec<_> = rows.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 100);
    assert!(records.iter().all(|r| &r[g] == "1" && &r[3] == "g=1"));
}

#[test]
fn counterfactuals_keep_exogenous_values() {
    let dir = TempDir::new().unwrap();
    let units = dir.path().join("units.csv");
    let common = ["--seed", "9", "--scorer", "mock:peaked"];
    let mut args = common.to_vec();
    args.extend(["-o", units.to_str().unwrap(), "sample", "--spec", "bundled:marathon_g2", "--n", "50"]);
    assert_eq!(code(&seqscm(&args)), 0);
    assert!(dir.path().join("units.meta.json").exists());
    let mut args = common.to_vec();
    args.extend(["counterfactual", "--spec", "bundled:marathon_g2", "--from", units.to_str().unwrap(), "--set", "g=0"]);
    let out = seqscm(&args);
    assert_eq!(code(&out), 0);
    let factual: Vec<csv::StringRecord> =
        csv::Reader::from_path(&units).unwrap().records().map(Result::unwrap).collect();
    let mut cf = csv::Reader::from_reader(out.stdout.as_slice());
    let header = cf.headers().unwrap().clone();
    let cols = |name: &str| header.iter().position(|h| h == name).unwrap();
    let cf: Vec<_> = cf.records().map(Result::unwrap).collect();
    assert_eq!(cf.len(), 50);
    for (a, b) in factual.iter().zip(&cf) {
        for name in ["u1", "u2"] {
            assert_eq!(a[cols(name)], b[cols(name)]);
        }
        assert_eq!(&b[cols("g")], "0");
        assert_eq!(&b[2], "counterfactual");
    }
}

#[test]
fn benchmark_project_estimate_evaluate() {
    let dir = TempDir::new().unwrap();
    let (_, table) = mocks::confounder_table().unwrap();
    let table = write_table(dir.path(), "conf.table.json", &table);
    let bench = dir.path().join("bench");
    let out = seqscm(&[
        "--seed",
        "2",
        "--scorer",
        &table,
        "-o",
        bench.to_str().unwrap(),
        "benchmark",
        "--spec",
        "bundled:marathon_g1",
        "--datasets",
        "2",
        "--size",
        "300",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(bench.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["runs"][0]["datasets"].as_array().unwrap().len(), 2);
    let ds = bench.join("variation_000/dataset_001.csv");
    assert!(bench.join("variation_000/dataset_001.meta.json").exists());

    let hidden = dir.path().join("hidden.csv");
    let out =
        seqscm(&["project", "--dataset", ds.to_str().unwrap(), "--hide-exogenous", "-o", hidden.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let header = fs::read_to_string(&hidden).unwrap().lines().next().unwrap().to_string();
    assert!(header.starts_with("unit_id,w,t,y,"), "{header}");

    let preds = dir.path().join("preds.csv");
    let out = seqscm(&[
        "-o",
        preds.to_str().unwrap(),
        "estimate",
        "--dataset",
        hidden.to_str().unwrap(),
        "--target",
        "prob:1",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read_to_string(&preds).unwrap().lines().count(), 301);

    for args in [
        vec![
            "evaluate",
            "--dataset",
            hidden.to_str().unwrap(),
            "--predictions",
            preds.to_str().unwrap(),
            "--target",
            "prob:1",
        ],
        vec![
            "evaluate",
            "--dataset",
            hidden.to_str().unwrap(),
            ds.to_str().unwrap(),
            "--method",
            "linear_t",
            "--target",
            "logp:0",
        ],
    ] {
        let out = seqscm(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let mut r = csv::Reader::from_reader(out.stdout.as_slice());
        let pehe = r.headers().unwrap().iter().position(|h| h == "pehe").unwrap();
        let rows: Vec<_> = r.records().map(Result::unwrap).collect();
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|row| row[pehe].parse::<f64>().unwrap() >= 0.0));
    }

    let report = dir.path().join("report.csv");
    let out = seqscm(&[
        "-o",
        report.to_str().unwrap(),
        "evaluate",
        "--dataset",
        hidden.to_str().unwrap(),
        ds.to_str().unwrap(),
        "--target",
        "prob:1",
    ]);
    assert_eq!(code(&out), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["methods"][0]["datasets"], 2);
    assert!(summary["methods"][0]["metrics"]["pehe"]["median"].is_number());

    let out = seqscm(&["estimate", "--dataset", hidden.to_str().unwrap(), "--method", "forest"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn audit_writes_paired_rows() {
    let dir = TempDir::new().unwrap();
    let (_, up) = mocks::effect_table(0.1).unwrap();
    let (_, down) = mocks::effect_table(-0.1).unwrap();
    let up = write_table(dir.path(), "up.table.json", &up);
    let down = write_table(dir.path(), "down.table.json", &down);
    let report = dir.path().join("audit");
    let scorers = format!("up={up},down={down}");
    let out = seqscm(&[
        "--seed",
        "5",
        "-o",
        report.to_str().unwrap(),
        "audit",
        "--spec",
        "bundled:sign_flip",
        "--scorers",
        &scorers,
        "--variations",
        "3",
        "--size",
        "200",
        "--targets",
        "prob:1,cat:1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut r = csv::Reader::from_path(report.join("audit.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["scorer", "variation", "target", "sate", "sate_sd_units", "error"]);
    let rows: Vec<_> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2 * 3 * 2);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(report.join("audit_summary.json")).unwrap()).unwrap();
    assert!(summary["command"].as_array().is_some());
}

#[test]
fn bundled_specs_round_trip_through_validate() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("g1.scm.json");
    fs::write(&path, seqscm::spec::serialize_spec(&bundled::marathon_g1())).unwrap();
    assert_eq!(code(&seqscm(&["validate", path.to_str().unwrap()])), 0);
}
