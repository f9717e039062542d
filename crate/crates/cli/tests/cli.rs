use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_entropy-lab"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).env_remove("ENTROPY_LAB_THREADS").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const DOUBLING_BOWEN: &str = r#"{
  "schema_version": 1,
  "id": "doubling-bowen",
  "experiment": {
    "kind": "bowen",
    "system": {"kind": "circle_doubling"},
    "metric": {"kind": "circle_arc"},
    "region": {"circle_grid": {"points": 4096}},
    "schedule": {"eps_list": [0.0078125, 0.03125, 0.015625], "n_min": 4, "n_max": 12},
    "expect": {"min": 0.62, "max": 0.76}
  }
}"#;

#[test]
fn lists_presets() {
    let o = bin().arg("presets").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert!(text.contains("counterexample-circle"));
}

#[test]
fn passing_preset_exits_zero_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", "lifted-measure", "--seed", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["records.csv", "lifted_table.csv", "summary.json", "timings.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["seed"], 5);
    assert_eq!(summary["passed"], true);
}

#[test]
fn format_selects_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", "lifted-measure", "--format", "json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("summary.json").exists());
    assert!(!dir.path().join("records.csv").exists());
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", "no-such-preset"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no-such-preset"));
}

#[test]
fn bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run", "lifted-measure", "--format", "xml"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["run"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["run", "lifted-measure", "--threads", "0"], dir.path()).status.code(), Some(2));
}

#[test]
fn undefined_metric_kind_names_the_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &DOUBLING_BOWEN.replace("circle_arc", "taxicab"));
    let o = run(&["run", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment.metric"), "{}", stderr(&o));
}

#[test]
fn empty_eps_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = DOUBLING_BOWEN.replace("[0.0078125, 0.03125, 0.015625]", "[]");
    let cfg = write_config(dir.path(), &text);
    let o = run(&["run", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment.schedule.eps_list"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", "--config", "/nonexistent/config.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_assertion_exits_one_and_names_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"experiment": {"kind": "measure", "system": {"kind": "full_shift", "alphabet": 2},
        "measure": {"bernoulli": [0.5, 0.5]}, "partition": {"cells": {"generator": 2}}, "n_max": 4,
        "expect": {"min": 1.0}}}"#;
    let cfg = write_config(dir.path(), text);
    let o = run(&["run", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("measure.entropy_rate"), "{}", stderr(&o));
}

#[test]
fn explicit_config_matches_preset_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = run(&["run", "doubling-bowen", "--seed", "9", "--threads", "1"], a.path());
    let cfg = write_config(b.path(), DOUBLING_BOWEN);
    let pb = run(&["run", "--config", &cfg, "--seed", "9", "--threads", "3"], b.path());
    assert_eq!(pa.status.code(), pb.status.code());
    for f in ["records.csv", "bowen_cells.csv", "bowen_slopes.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn thread_count_from_environment() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = bin().args(["run", "jordan-battery", "--out"]).arg(a.path()).env("ENTROPY_LAB_THREADS", "1").output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = bin().args(["run", "jordan-battery", "--threads", "4", "--out"]).arg(b.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    for f in ["records.csv", "jordan_table.csv", "recurrence_table.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
