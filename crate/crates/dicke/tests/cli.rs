use std::fs;
use std::path::Path;
use std::process::Command;

use dicke::config::ExperimentSpec;
use dicke::output::read_csv;
use dicke::runner::{run_file, RunOptions, Status};
use dicke::RunError;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["", "plots"] {
        let d = dir.join(sub);
        if !d.exists() {
            continue;
        }
        let mut names: Vec<_> = fs::read_dir(&d)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        names.sort();
        for p in names {
            out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
        }
    }
    out
}

fn opts(out: &Path, threads: usize) -> RunOptions {
    RunOptions {
        out: Some(out.to_path_buf()),
        seed: None,
        threads: Some(threads),
    }
}

const TRAJECTORIES: &str = r#"{
  "schema_version": "1.0",
  "experiment": "trajectories",
  "geometry": {"kind": "chain", "n_atoms": 3, "spacing": {"xi": 0.3}, "axis_parallel_to_dipole": false},
  "coupling": {"mode": "regularized"},
  "numerics": {"seed": 7, "n_traj": 60, "t_max": 20.0, "channels": "directed", "n_theta": 10, "n_phi": 8,
               "compare_without_dipole": true, "histogram_bins": 12}
}"#;

#[test]
fn rerun_of_archived_spec_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "t.json", TRAJECTORIES);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let r = run_file(&spec, None, &opts(&a, 1)).unwrap();
    assert_eq!(r.status, Status::Success);
    run_file(&a.join("spec.json"), None, &opts(&b, 3)).unwrap();
    let (ca, cb) = (csvs(&a), csvs(&b));
    assert!(ca.iter().any(|(n, _)| n == "events.csv"));
    assert!(ca.iter().any(|(n, _)| n == "angular.csv"));
    assert_eq!(ca, cb);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["spec_sha256"].as_str().unwrap().len(), 64);
    let events = read_csv(&a.join("events.csv")).unwrap();
    assert_eq!(&events.header[..5], &["traj_id", "jump_index", "time", "theta_bin", "phi_bin"]);
}

#[test]
fn coupling_scan_writes_figure_files() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(
        tmp.path(),
        "c.json",
        r#"{"schema_version": "1.0", "experiment": "coupling-scan", "numerics": {"n_points": 40, "etas": [0.0, 1.0]}}"#,
    );
    let out = tmp.path().join("o");
    run_file(&spec, None, &opts(&out, 2)).unwrap();
    let t = read_csv(&out.join("coefficients.csv")).unwrap();
    assert_eq!(t.rows.len(), 80);
    let fig = read_csv(&out.join("plots/shifts_eta_0.csv")).unwrap();
    assert_eq!(
        fig.header,
        vec!["xi", "delta_perp_reg_over_E0", "delta_par_reg_scaled_1e4", "sum_unreg_over_E0", "sum_reg_over_E0"]
    );
    let log = read_csv(&out.join("plots/shifts_loglog_eta_1.csv")).unwrap();
    let flips = log.column("sign_change_unreg").unwrap();
    assert!(log.rows.iter().any(|r| r[flips] == "1"));
    assert!(out.join("plots/shifts_loglog_eta_1.gp").exists());
}

#[test]
fn evolve_and_timescales_run() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(
        tmp.path(),
        "e.json",
        r#"{"schema_version": "1.0", "experiment": "evolve",
            "geometry": {"kind": "chain", "n_atoms": 3, "spacing": {"xi": 0.005}, "axis_parallel_to_dipole": true},
            "coupling": {"mode": "dicke_expansion"},
            "numerics": {"initial_state": "b", "t_min": 1e-7, "t_max": 1e-4, "n_times": 30}}"#,
    );
    let out = tmp.path().join("e");
    run_file(&spec, Some(dicke::config::ExperimentKind::Evolve), &opts(&out, 1)).unwrap();
    let t = read_csv(&out.join("populations.csv")).unwrap();
    assert_eq!(t.rows.len(), 31);
    let pb = t.column("P_b").unwrap();
    assert!((t.rows[0][pb].parse::<f64>().unwrap() - 1.0).abs() < 1e-14);

    let spec = write(
        tmp.path(),
        "s.json",
        r#"{"schema_version": "1.0", "experiment": "timescales",
            "numerics": {"n_min": 3, "n_max": 5, "spacings_lambda0": [5.1e-4]}}"#,
    );
    let out = tmp.path().join("s");
    run_file(&spec, None, &opts(&out, 2)).unwrap();
    let t = read_csv(&out.join("timescales.csv")).unwrap();
    assert_eq!(
        &t.header[..8],
        &["n_atoms", "spacing_lambda0", "xi", "t_dicke", "t_rate", "ratio", "min_gamma_ratio", "validity_flag"]
    );
    assert_eq!(t.rows.len(), 3);
}

#[test]
fn malformed_specs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "b.json", "{\n  \"schema_version\": \"1.0\",\n  \"experiment\": \"evolve\",\n  \"bogus\": 1\n}");
    match ExperimentSpec::load(&bad) {
        Err(RunError::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected parse error, got {other:?}"),
    }
    let newer = write(tmp.path(), "n.json", r#"{"schema_version": "2.0", "experiment": "validate"}"#);
    assert!(matches!(ExperimentSpec::load(&newer), Err(RunError::Spec { .. })));
    let missing = write(tmp.path(), "m.json", r#"{"schema_version": "1.0", "experiment": "evolve"}"#);
    assert!(matches!(ExperimentSpec::load(&missing), Err(RunError::Spec { .. })));
    let scan = write(tmp.path(), "c.json", r#"{"schema_version": "1.0", "experiment": "coupling-scan"}"#);
    let wrong = run_file(&scan, Some(dicke::config::ExperimentKind::Evolve), &RunOptions::default());
    assert!(wrong.is_err());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_dicke");
    let ok = Command::new(bin)
        .args(["validate", "--criteria", "2", "--out"])
        .arg(tmp.path().join("ok"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS"));
    let failing = Command::new(bin)
        .args(["validate", "--criteria", "4", "--out"])
        .arg(tmp.path().join("fail"))
        .output()
        .unwrap();
    assert_eq!(failing.status.code(), Some(2));
    let missing = Command::new(bin)
        .args(["evolve", "--spec"])
        .arg(tmp.path().join("absent.json"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
}
