use std::process::Command;

use sms_core::experiments::{cmd_diagnose, ExperimentConfig};
use sms_core::grid::{build_domain, DomainShape, Field};
use sms_core::SmsError;

fn sms() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sms"))
}

#[test]
fn groundstate_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = sms().args(["groundstate", "--p", "5", "--dim", "1", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("groundstate_d1_p5.csv").exists());
    assert!(dir.path().join("groundstate_d1_p5.json").exists());
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = sms().args(["sweep-eps", "--p", "7", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = sms().args(["multiplicity", "--eps", "0.3", "--h", "0.1", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema": 99}"#).unwrap();
    let out = sms().args(["multiplicity", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn diagnose_rejects_a_field_without_positive_part() {
    let dir = tempfile::tempdir().unwrap();
    let grid = build_domain(&DomainShape::ball(1.0), 0.1, 3).unwrap();
    let path = dir.path().join("zero.smsfield");
    Field::zeros(&grid).save(&path).unwrap();
    let cfg = ExperimentConfig { out_dir: dir.path().to_string_lossy().into(), eps: vec![0.4], ..Default::default() };
    let err = cmd_diagnose(&path, &cfg, None).unwrap_err();
    assert!(matches!(err, SmsError::ZeroPositivePart));
    assert_eq!(err.to_string(), "u⁺ vanishes");
    let out = sms().arg("diagnose").arg(&path).args(["--eps", "0.4", "--out"]).arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("u⁺ vanishes"));
}

#[test]
fn multiplicity_then_diagnose_and_morse_on_a_coarse_ball() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let common = ["--eps", "0.5", "--eps-over-h", "4", "--perturbations", "1"];
    let out = sms().arg("multiplicity").args(common).arg("--out").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let rec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("multiplicity.json")).unwrap()).unwrap();
    assert_eq!(rec["distinct"], 1);
    assert_eq!(rec["seeds"], 2);
    let hash = rec["run"]["config_hash"].as_str().unwrap().to_string();

    let field = out_dir.join("solution_0.smsfield");
    let out = sms().arg("diagnose").arg(&field).args(common).arg("--out").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let diag: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(diag["config_hash"].as_str(), Some(hash.as_str()));
    let (a, b) = (diag["energy_identity_g"].as_f64().unwrap(), diag["energy_identity_b"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-6 * a.abs());
    assert!(out_dir.join("solution_0.partition.csv").exists());

    let out = sms().arg("morse").arg(&out_dir).args(common).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let sol: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("solution_0.json")).unwrap()).unwrap();
    assert_eq!(sol["spectrum"]["negative_count"], 1);
}
