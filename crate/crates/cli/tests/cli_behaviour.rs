use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], config: &str) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_anosov"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    (out, dir)
}

const CAT: &str = r#"{"map": {"matrix": [[2, 1], [1, 1]]}, "seed": 3}"#;

#[test]
fn verify_passes_on_the_cat_map() {
    let (out, dir) = run(&["verify"], CAT);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("verify: pass"));
    let v: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/verify.json")).unwrap())
            .unwrap();
    assert_eq!(v["pass"], Value::Bool(true));
}

#[test]
fn equilibrium_pressure_field() {
    let (out, dir) = run(&["equilibrium"], CAT);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/equilibrium.json")).unwrap(),
    )
    .unwrap();
    let p = v["pressure"].as_f64().unwrap();
    assert!((p - 0.96242365).abs() < 1e-5, "{p}");
    let csv = std::fs::read_to_string(dir.path().join("out/ensemble.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x1,x2,weight"));
    assert_eq!(csv.lines().count(), 103_680 + 1);
}

#[test]
fn negative_tolerance_exits_with_validation_record() {
    let cfg =
        r#"{"map": {"matrix": [[2, 1], [1, 1]]}, "seed": 3, "numerics": {"conjugacy_tol": -1.0}}"#;
    let (out, _dir) = run(&["conjugacy"], cfg);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(err["error"]["kind"], "validation");
    assert_eq!(err["error"]["pointer"], "numerics.conjugacy_tol");
}

#[test]
fn unknown_key_exits_with_validation_record() {
    let cfg = r#"{"map": {"matrix": [[2, 1], [1, 1]], "eps": 0.1}, "seed": 3}"#;
    let (out, _dir) = run(&["verify"], cfg);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(err["error"]["pointer"], "map.eps");
}

#[test]
fn failing_cone_check_names_the_witness() {
    // a strong perturbation breaks uniform expansion
    let cfg = r#"{"map": {"matrix": [[2, 1], [1, 1]],
        "perturbations": [{"amplitude": 0.6, "direction": [1.0, 0.0], "frequency": [1, 0]}]}, "seed": 3}"#;
    let (out, dir) = run(&["verify"], cfg);
    assert_eq!(out.status.code(), Some(1));
    let err: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/error.json")).unwrap())
            .unwrap();
    assert_eq!(err["error"]["kind"], "check_failed");
    assert!(err["error"]["message"].as_str().unwrap().contains("cell"));
}

#[test]
fn seed_and_period_overrides() {
    let (out, dir) = run(&["equilibrium", "--period-override", "6"], CAT);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/equilibrium.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(v["period"], 6);
    let (out, _) = run(&["equilibrium", "--period-override", "40"], CAT);
    assert_eq!(out.status.code(), Some(2));
}
