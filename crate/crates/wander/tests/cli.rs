//! Exit codes and files of the `wander` binary.

use std::process::Command;

fn wander(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_wander")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"schema_version": 1, "params": {"k1": "three"}}"#).unwrap();
    let out = dir.path().join("out");
    let (code, err) = wander(&["schedule", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn unknown_field_and_wrong_version_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("unknown.json", r#"{"schema_version": 1, "params": {"k_maxx": 4}}"#),
        ("version.json", r#"{"schema_version": 99}"#),
        ("threads.json", r#"{"schema_version": 1, "threads": 0}"#),
    ] {
        let cfg = dir.path().join(name);
        std::fs::write(&cfg, text).unwrap();
        let (code, err) = wander(&["schedule", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code, 2, "{name}: {err}");
    }
}

#[test]
fn missing_state_bundle_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = wander(&["orbit-atlas", "--state", dir.path().join("none").to_str().unwrap(), "--window", "-1,-1,1,1", "--out", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn schedule_passes_and_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = wander(&["schedule", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(dir.path().join("schedule.csv").is_file());
    let certs: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("certificates.json")).unwrap()).unwrap();
    assert_eq!(certs["all_accepted"], true);
}

#[test]
fn toy_dbar_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dbar.json");
    std::fs::write(&cfg, r#"{"schema_version": 1, "threads": 2, "params": {"cells": 256, "half_width": 2.0, "tol": 4e-3}}"#).unwrap();
    let (code, err) = wander(&["dbar", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn failing_certificate_exits_one_unless_waived() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dbar.json");
    std::fs::write(&cfg, r#"{"schema_version": 1, "params": {"cells": 64, "tol": 1e-9}}"#).unwrap();
    let (code, _) = wander(&["dbar", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 1);
    let (code, err) = wander(&["dbar", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--waive", "dbar"]);
    assert_eq!(code, 0, "{err}");
}
