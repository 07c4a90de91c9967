use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fernn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fernn")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = fernn(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn strip_wall_time(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("wall_time_s");
            m.remove("runtime_ratio");
            m.values_mut().for_each(strip_wall_time);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_wall_time),
        _ => {}
    }
}

fn read_json(p: &str) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
    strip_wall_time(&mut v);
    v
}

#[test]
fn gen_data_requires_a_seed() {
    let out = fernn(&["gen-data", "cct", "--n", "4"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn gen_data_is_reproducible() {
    let a = ok(&["gen-data", "cct", "--n", "6", "--T", "15", "--seed", "7"]);
    let b = ok(&["gen-data", "cct", "--n", "6", "--T", "15", "--seed", "7"]);
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 1 + 6 * 15);
    let c = ok(&["gen-data", "cct", "--n", "6", "--T", "15", "--seed", "8"]);
    assert_ne!(a, c);
}

#[test]
fn interval_data_has_seven_steps() {
    let text = ok(&["gen-data", "interval", "--n", "4", "--seed", "1"]);
    assert_eq!(text.lines().next().unwrap(), "trace_id,time,x0,label");
    assert_eq!(text.lines().count(), 1 + 4 * 7);
}

#[test]
fn train_separable_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "sep.csv");
    let ck = path(dir.path(), "m.json");
    let report = path(dir.path(), "r.json");
    ok(&["gen-data", "step-threshold", "--n", "100", "--T", "20", "--seed", "3", "--out", &data]);
    let stdout = ok(&[
        "train", "--data", &data, "--length", "2", "--seed", "3", "--checkpoint", &ck, "--out", &report,
    ]);
    let r = read_json(&report);
    assert_eq!(r["command"], "train");
    assert_eq!(r["test_mcr"], 0.0);
    assert!(r["formula_length"].as_u64().unwrap() <= 2);
    let formula = r["formula"].as_str().unwrap();
    assert_eq!(stdout.lines().next().unwrap(), formula);

    let inspected: Value = serde_json::from_str(&ok(&["inspect", &ck, "--json"])).unwrap();
    assert_eq!(inspected["formula"], formula);
    assert_eq!(inspected["choice_blocks"], 2);

    let mcr = ok(&["eval", formula, &data]);
    assert_eq!(mcr.trim().parse::<f64>().unwrap(), 0.0);
}

#[test]
fn seeded_training_reports_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "cct.csv");
    ok(&["gen-data", "cct", "--n", "40", "--T", "30", "--seed", "2", "--out", &data]);
    let run = |name: &str| {
        let out = path(dir.path(), name);
        ok(&["train", "--data", &data, "--length", "2", "--seed", "5", "--max-epochs", "200", "--out", &out]);
        read_json(&out)
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn continuous_labels_conflict_with_tanh() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "cct.csv");
    ok(&["gen-data", "cct", "--n", "10", "--T", "20", "--seed", "2", "--out", &data]);
    let out = fernn(&[
        "train", "--data", &data, "--length", "2", "--seed", "1", "--continuous-labels", "G (v <= 34.3)", "--head",
        "tanh",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error: "));
}

#[test]
fn no_since_reports_the_paired_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "cct.csv");
    ok(&["gen-data", "cct", "--n", "30", "--T", "20", "--seed", "4", "--out", &data]);
    let stdout = ok(&[
        "train", "--data", &data, "--length", "4", "--seed", "1", "--no-since", "--max-epochs", "30", "--json",
    ]);
    let r: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(r["model"]["use_since"], false);
    assert!(!r["formula"].as_str().unwrap().contains(" S "));
    assert!(r["paired_with_since"]["runtime_ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn monitor_prints_one_row_per_trace() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "sep.csv");
    ok(&["gen-data", "step-threshold", "--n", "8", "--T", "5", "--seed", "1", "--out", &data]);
    let text = ok(&["monitor", "F (x0 >= 0)", &data]);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "trace_id,robustness,sign,label");
    assert_eq!(rows.len(), 9);
    for row in &rows[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        let rho: f64 = cols[1].parse().unwrap();
        assert_eq!(cols[2], if rho > 0.0 { "1" } else { "-1" });
    }
}

#[test]
fn enumerate_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "sep.csv");
    let out = path(dir.path(), "e.json");
    ok(&["gen-data", "step-threshold", "--n", "40", "--T", "10", "--seed", "1", "--out", &data]);
    ok(&["enumerate", "--data", &data, "--length", "2", "--no-early-exit", "--grid", "10", "--out", &out]);
    let r = read_json(&out);
    assert_eq!(r["mcr"], 0.0);
    assert_eq!(r["structures_tried"], r["structures_enumerated"]);
}

#[test]
fn bad_inputs_fail_with_one_line() {
    let out = fernn(&["eval", "G (x0 <= 1)", "/nonexistent/data.csv"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
}
