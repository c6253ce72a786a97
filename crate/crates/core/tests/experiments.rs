use std::process::Command;

use glab::experiments::{replay, run_experiment, ExperimentConfig, ExperimentName};
use glab::{GlabError, RngSeed};
use serde_json::json;

const FIXTURE: &str = include_str!("fixtures/volume_radius_gaussian_n4_seed4.csv");

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn volume_radius_table_matches_fixture() {
    let config = ExperimentConfig::new(ExperimentName::VolumeRadius, json!({"n": 4}), RngSeed::new(4));
    let report = run_experiment(&config).unwrap();
    let csv = report.table("volume_radius").unwrap();
    assert!(csv.starts_with("# schema_version="));

    let (header, rows) = parse_csv(csv);
    let (fixture_header, fixture_rows) = parse_csv(FIXTURE);
    assert_eq!(header, fixture_header);
    assert!(header.iter().any(|h| h == "normalized"));
    let ms: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(ms, vec![8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0]);
    for (got, want) in rows.iter().zip(&fixture_rows) {
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn gluskin_pair_csv_is_byte_identical() {
    let params = json!({"model": "basis_enriched", "n": 2, "m": 4, "trials": 10});
    let config = ExperimentConfig::new(ExperimentName::GluskinPair, params, RngSeed::new(99));
    let first = run_experiment(&config).unwrap();
    let second = run_experiment(&config).unwrap();
    let csv = first.table("gluskin_pair").unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 11);
    assert_eq!(csv, second.table("gluskin_pair").unwrap());
    assert!(replay(&first).unwrap());
}

#[test]
fn written_artifacts_reload() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::new(ExperimentName::OperatorBallVolume, json!({"trials": 20000}), RngSeed::new(1));
    config.output_dir = Some(dir.path().to_path_buf());
    let report = run_experiment(&config).unwrap();
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let back: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(back["config"]["experiment"], "operator_ball_volume");
    for name in &report.artifacts {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn validation_errors_map_to_exit_two() {
    let bad_band = ExperimentConfig::new(ExperimentName::RadiusBand, json!({"eps0": 4.0, "b": 3.0}), RngSeed::new(0));
    assert_eq!(run_experiment(&bad_band).unwrap_err().exit_code(), 2);

    let typo = ExperimentConfig::from_json(r#"{"experiment": "radius_band", "parameters": {"mm": 10}, "seed": 0}"#).unwrap();
    assert_eq!(run_experiment(&typo).unwrap_err().exit_code(), 2);

    let unknown = ExperimentConfig::from_json(r#"{"experiment": "nope", "seed": 0}"#).unwrap_err();
    assert!(matches!(unknown, GlabError::Usage(_)));
}

fn glab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_glab"));
    c.env_remove("GLAB_SEED");
    c
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"experiment": "radius_band", "parameters": {"eps0": 5, "b": 3}, "seed": 1}"#).unwrap();
    let out = glab().args(["--out"]).arg(dir.path()).args(["experiment", "run"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps0"));

    std::fs::write(&cfg, r#"{"experiment": "unconditional_certificate", "parameters": {"trials": 20000}, "seed": 1}"#).unwrap();
    let out = glab().args(["--out"]).arg(dir.path()).args(["experiment", "run"]).arg(&cfg).output().unwrap();
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn cli_seed_flag_overrides_env() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let dir = tempfile::tempdir().unwrap();
        let mut c = glab();
        if let Some(e) = env {
            c.env("GLAB_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        let out = c.args(["--out"]).arg(dir.path()).args(["sample", "--n", "2", "--m", "3"]).output().unwrap();
        assert!(out.status.success());
        std::fs::read_to_string(dir.path().join("samples.csv")).unwrap()
    };
    assert_eq!(run(Some("5"), None), run(None, Some("5")));
    assert_eq!(run(Some("6"), Some("5")), run(None, Some("5")));
    assert_ne!(run(None, Some("6")), run(None, Some("5")));
}

#[test]
fn cli_norm_and_opnorm() {
    let dir = tempfile::tempdir().unwrap();
    let out = glab().args(["--out"]).arg(dir.path()).args(["norm", "--body", "cross:3", "--point", "1,-2,0.5"]).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["norm"].as_f64().unwrap() - 3.5).abs() < 1e-9);

    let out = glab()
        .args(["--out"])
        .arg(dir.path())
        .args(["opnorm", "--map", "1,0.5;-0.25,2", "--from", "cube:2", "--to", "cross:2"])
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["norm"].as_f64().unwrap() - 3.25).abs() < 1e-9);
}
