use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use onebit_mimo::harness::{config_hash, emit_csv, read_csv, run_experiment, ExperimentKind, ExperimentSpec};

const BIN: &str = env!("CARGO_BIN_EXE_onebit-sim");

fn experiments_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments")
}

fn small_sweep(realizations: usize) -> String {
    format!(
        r#"{{
  "kind": "sweep_power",
  "scenario": {{
    "bs_positions": [[0, 0]], "antennas_per_bs": 16, "ue_positions": [[30, 0]],
    "num_channel_realizations": {realizations}, "seed": 5
  }},
  "axis": {{"start": -10, "stop": 30, "step": 5, "units": "dBm"}}
}}"#
    )
}

#[test]
fn every_experiment_file_parses() {
    let mut seen = Vec::new();
    for entry in fs::read_dir(experiments_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let spec = ExperimentSpec::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(spec.output.is_some(), "{}", path.display());
        seen.push(spec.kind);
    }
    for kind in [
        ExperimentKind::SweepPower,
        ExperimentKind::SweepDistance,
        ExperimentKind::MinPowerVsTarget,
        ExperimentKind::MinPowerVsDistance,
        ExperimentKind::MaxminVsDistance,
        ExperimentKind::OracleSuite,
    ] {
        assert!(seen.contains(&kind), "no experiment for {}", kind.name());
    }
}

#[test]
fn rerun_is_byte_identical() {
    let spec = ExperimentSpec::from_json(&small_sweep(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emit_csv(&run_experiment(&spec).unwrap(), &a).unwrap();
    emit_csv(&run_experiment(&spec).unwrap(), &b).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let back = read_csv(&a).unwrap();
    assert_eq!(back.meta("config_sha256"), Some(config_hash(&spec).as_str()));
    assert_eq!(back.meta("seed"), Some("5"));
    assert_eq!(back.meta("realizations"), Some("3"));
    assert_eq!(back.rows.len(), 9);
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let spec = ExperimentSpec::from_json(&small_sweep(4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    fs::write(&path, small_sweep(4)).unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out = Command::new(BIN)
            .args(["sweep-power", "--config"])
            .arg(&path)
            .env("ONEBIT_WORKERS", workers)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(out.stdout);
    }
    assert_eq!(outputs[0], outputs[1]);
    let in_process = run_experiment(&spec).unwrap().to_csv_string().unwrap();
    assert_eq!(String::from_utf8(outputs.pop().unwrap()).unwrap(), in_process);
}

#[test]
fn seed_flag_changes_hash_and_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    fs::write(&path, small_sweep(2)).unwrap();
    let run = |seed: &str| {
        let out = Command::new(BIN)
            .args(["sweep-power", "--seed", seed, "--config"])
            .arg(&path)
            .output()
            .unwrap();
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    let (a, b) = (run("5"), run("6"));
    assert_ne!(a, b);
    let ta = onebit_mimo::harness::ResultTable::from_csv_str(&a).unwrap();
    let tb = onebit_mimo::harness::ResultTable::from_csv_str(&b).unwrap();
    assert_ne!(ta.meta("config_sha256"), tb.meta("config_sha256"));
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    fs::write(&good, small_sweep(1)).unwrap();
    let out_csv = dir.path().join("nested/out.csv");
    let status = Command::new(BIN)
        .args(["sweep-power", "--realizations", "1", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(&out_csv)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(read_csv(&out_csv).unwrap().rows.len(), 9);

    // Unknown key.
    let bad = dir.path().join("bad.json");
    fs::write(&bad, small_sweep(1).replacen("\"kind\"", "\"colour\": 1, \"kind\"", 1)).unwrap();
    let out = Command::new(BIN)
        .args(["sweep-power", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    // Wrong subcommand for the kind.
    let out = Command::new(BIN)
        .args(["max-min", "--config"])
        .arg(&good)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Missing file.
    let out = Command::new(BIN)
        .args(["sweep-power", "--config"])
        .arg(dir.path().join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Corrupted Bussgang gain makes the oracle fail.
    let oracle = dir.path().join("oracle.json");
    fs::write(
        &oracle,
        r#"{
  "kind": "oracle_suite",
  "scenario": {"bs_positions": [[0, 0]], "antennas_per_bs": 1, "ue_positions": [[1, 0]], "seed": 3},
  "oracle": {"sizes": [[1, 2, 1]], "draws": 100000, "gain_scale": 1.1}
}"#,
    )
    .unwrap();
    let out = Command::new(BIN)
        .args(["oracle", "--config"])
        .arg(&oracle)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("bussgang_pass"));
}
