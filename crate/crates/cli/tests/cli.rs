use std::process::{Command, Output};

use serde_json::Value;

fn tsmkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsmkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn validate_builtin_groups() {
    for group in ["heisenberg", "quaternionic", "heisenberg:3"] {
        let out = tsmkit(&["validate", "--group", group]);
        assert_eq!(out.status.code(), Some(0), "{group}");
    }
}

#[test]
fn validate_rejects_non_skew_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    std::fs::write(&path, r#"{"n": 1, "m": 1, "U": [[0, 1, 0, 0]]}"#).unwrap();
    let out = tsmkit(&["validate", "--group", path.to_str().unwrap()]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn reduce_reports_mu() {
    let out = tsmkit(&["reduce", "--group", "quaternionic", "--lambda", "3,4,0", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for mu in v["mu"].as_array().unwrap() {
        assert!((mu.as_f64().unwrap() - 5.0).abs() < 1e-10);
    }
    let text = tsmkit(&["reduce", "--group", "quaternionic", "--lambda", "3,4,0"]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("mu = [5, 5]"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(tsmkit(&["reduce", "--group", "quaternionic", "--lambda", "1,2"]).status.code(), Some(2));
    assert_eq!(tsmkit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(tsmkit(&["verify", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(tsmkit(&["mean", "--group", "heisenberg", "--lambda", "0", "--f", "[{}]", "--z", "0", "--s", "1"]).status.code(), Some(2));
}

#[test]
fn mean_of_constant_at_origin() {
    let out = tsmkit(&[
        "mean", "--group", "heisenberg", "--lambda", "1", "--f", "[{}]", "--z", "0", "--s", "1", "--format", "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["value"][0].as_f64().unwrap() - 1.0).abs() < 1e-14);
    assert!(v["value"][1].as_f64().unwrap().abs() < 1e-14);
}

#[test]
fn ode_check_exit_codes() {
    let stated = tsmkit(&["ode-check", "--p", "1", "--q", "1", "--n", "2"]);
    assert_eq!(stated.status.code(), Some(1));
    let coupled = tsmkit(&["ode-check", "--p", "1", "--q", "1", "--n", "2", "--family", "coupled", "--stack", "chain"]);
    assert_eq!(coupled.status.code(), Some(0));
    let a_only = tsmkit(&["ode-check", "--p", "2", "--q", "1", "--n", "1", "--b", "0"]);
    assert_eq!(a_only.status.code(), Some(0));
}

#[test]
fn verify_writes_deterministic_reports() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = tsmkit(&["verify", "--suite", "reduce", "--cases", "10", "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ra, rb): (Value, Value) = (
        serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap(),
        serde_json::from_str(&std::fs::read_to_string(&b).unwrap()).unwrap(),
    );
    assert_eq!(ra["records"], rb["records"]);
    assert_eq!(ra["provenance"], rb["provenance"]);
    assert!(ra.get("wall_clock_seconds").is_none());
    assert_eq!(ra["summary"]["ok"], true);
}

#[test]
fn verify_config_file_and_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("th42.json");
    std::fs::write(
        &cfg,
        r#"{"suite": "th42", "group": "heisenberg", "params": {"p": [1]},
            "grid": {"z_samples": 1, "s_samples": 2}, "quad": "angles:16",
            "perturb": {"exponent_offset": 1}, "negative_controls": false}"#,
    )
    .unwrap();
    let out = tsmkit(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report = json(&out);
    assert!(report["summary"]["unexpected"].as_u64().unwrap() > 0);

    std::fs::write(&cfg, r#"{"suite": "th42", "unknown_field": 3}"#).unwrap();
    assert_eq!(tsmkit(&["verify", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verify_csv_output() {
    let out = tsmkit(&["verify", "--suite", "structure", "--cases", "3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("key,expect,residual,tolerance,passed,as_expected,error"));
    assert!(lines.any(|l| l.starts_with("control/non_skew,fail,")));
}
