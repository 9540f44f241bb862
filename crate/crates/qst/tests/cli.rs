use std::fs;
use std::path::Path;
use std::process::Command;

use qst::cli;
use qst::ExperimentConfig;

fn run(args: &[&str]) -> i32 {
    cli::run(std::iter::once("qst").chain(args.iter().copied()))
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn last_row(path: &Path) -> csv::StringRecord {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().last().unwrap().unwrap()
}

fn column(path: &Path, name: &str) -> usize {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().position(|h| h == name).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&[]), 2);
    assert_eq!(run(&["sweep", "nonsense"]), 2);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn binary_reports_unknown_command() {
    let out = Command::new(env!("CARGO_BIN_EXE_qst")).arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn malformed_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"N\": 5,\n  \"J_B_times_T\": ,\n}\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qst"))
        .args(["validate", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 3"), "{msg}");
    assert!(msg.contains("column"), "{msg}");
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_arg(dir.path());
    assert_eq!(run(&["design", "--output-dir", &o, "-o", "N=2"]), 2);
    assert_eq!(run(&["design", "--output-dir", &o, "-o", "bogus_key=1"]), 2);
    assert_eq!(run(&["design", "--output-dir", &o, "-o", "noise.gamma_over_JM=-1"]), 2);
    assert_eq!(run(&["design", "--output-dir", &o, "-o", "N"]), 2);
    let cfg = dir.path().join("extra.json");
    fs::write(&cfg, r#"{"N": 5, "pulse": {"N_beta": 3, "width": 1}}"#).unwrap();
    assert_eq!(run(&["design", "--output-dir", &o, "--config", cfg.to_str().unwrap()]), 2);
}

#[test]
fn unreachable_phase_target_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_arg(dir.path());
    assert_eq!(run(&["design", "--output-dir", &o, "-o", "N=4", "-o", "pulse.N_beta=1", "-o", "pulse.f_winding=0"]), 3);
}

#[test]
fn validate_passes_for_default_chain() {
    assert_eq!(run(&["validate", "-o", "N=5"]), 0);
}

#[test]
fn design_writes_schedule_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/out");
    let o = out_arg(&out);
    assert_eq!(run(&["design", "--matrices", "--output-dir", &o]), 0);
    for f in ["schedule_N5.csv", "heff_N5_half.csv", "he_N5_half.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let sched = out.join("schedule_N5.csv");
    let rows: Vec<csv::StringRecord> = csv::Reader::from_path(&sched).unwrap().records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), qst_core::pulse::DEFAULT_SAMPLES);
    let (js, jr) = (column(&sched, "J_S"), column(&sched, "J_R"));
    for row in [&rows[0], &rows[rows.len() - 1]] {
        assert!(row[js].parse::<f64>().unwrap().abs() < 1e-9);
        assert!(row[jr].parse::<f64>().unwrap().abs() < 1e-9);
    }
    let jm = rows
        .iter()
        .flat_map(|r| [r[js].parse::<f64>().unwrap(), r[jr].parse::<f64>().unwrap()])
        .fold(f64::MIN, f64::max);
    assert!((8.0..=12.0).contains(&jm), "J_M = {jm}");
}

#[test]
fn manifest_round_trips_to_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_arg(dir.path());
    assert_eq!(run(&["design", "--output-dir", &o, "-o", "N=6", "-o", "sweeps.fig2_N=[4,5]"]), 0);
    let manifest_path = dir.path().join("manifest.json");
    let loaded = ExperimentConfig::load(&manifest_path).unwrap();
    let expected = ExperimentConfig::default().with_overrides(&["N=6", "sweeps.fig2_N=[4,5]"]).unwrap();
    assert_eq!(loaded, expected);

    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["command"], "design");
    let entry = &doc["datasets"][0];
    assert_eq!(entry["file"], "schedule_N6.csv");
    let resolved = ExperimentConfig::from_value(entry["config"].clone()).unwrap();
    assert_eq!(resolved.n, 6);
    assert!(resolved.pulse.mu.is_some());
    // Every default is spelled out.
    assert!(entry["config"]["noise"]["noisy_fidelity"].is_string());
    assert!(entry["config"]["sweeps"]["zeno_J_B_times_T"].is_array());

    // Rerunning from the manifest reproduces the dataset byte for byte.
    let again = tempfile::tempdir().unwrap();
    let a = out_arg(again.path());
    assert_eq!(run(&["design", "--output-dir", &a, "--config", manifest_path.to_str().unwrap()]), 0);
    assert_eq!(
        fs::read(dir.path().join("schedule_N6.csv")).unwrap(),
        fs::read(again.path().join("schedule_N6.csv")).unwrap()
    );
    assert_eq!(ExperimentConfig::load(&again.path().join("manifest.json")).unwrap(), loaded);
}

#[test]
fn evolve_reaches_the_transfer_band() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_arg(dir.path());
    assert_eq!(run(&["evolve", "--output-dir", &o, "-o", "N=5", "-o", "J_B_times_T=1000"]), 0);
    let path = dir.path().join("trajectory_N5.csv");
    let last = last_row(&path);
    assert_eq!(last[column(&path, "t_over_T")].parse::<f64>().unwrap(), 1.0);
    let f: f64 = last[column(&path, "F")].parse().unwrap();
    assert!(f > 0.99, "F(T) = {f}");
    let pops: f64 = (1..=5).map(|k| last[column(&path, &format!("pop_site_{k}"))].parse::<f64>().unwrap()).sum();
    assert!((pops - 1.0).abs() < 1e-9);
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &Path, threads: &'static str| {
        vec![
            "sweep".to_string(),
            "disorder".into(),
            "--output-dir".into(),
            out_arg(d),
            "--threads".into(),
            threads.into(),
            "-o".into(),
            "sweeps.disorder_points=3".into(),
            "-o".into(),
            "J_B_times_T=200".into(),
        ]
    };
    assert_eq!(cli::run(std::iter::once("qst".to_string()).chain(args(a.path(), "1"))), 0);
    assert_eq!(cli::run(std::iter::once("qst".to_string()).chain(args(b.path(), "2"))), 0);
    assert_eq!(fs::read(a.path().join("fig5.csv")).unwrap(), fs::read(b.path().join("fig5.csv")).unwrap());
    assert_eq!(
        fs::read(a.path().join("manifest.json")).unwrap(),
        fs::read(b.path().join("manifest.json")).unwrap()
    );
}

#[test]
fn figures_writes_every_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_arg(dir.path());
    let code = run(&[
        "figures",
        "--output-dir",
        &o,
        "-o",
        "J_B_times_T=200",
        "-o",
        "sweeps.fig2_N=[4,5]",
        "-o",
        "sweeps.bus_J_B_times_T=[100,200]",
        "-o",
        "sweeps.bus_N=[4]",
        "-o",
        "sweeps.disorder_points=3",
        "-o",
        "sweeps.dephasing_points=2",
        "-o",
        "sweeps.zeno_J_B_times_T=[100]",
    ]);
    assert_eq!(code, 0);
    for f in ["fig2_N4.csv", "fig2_N5.csv", "fig3.csv", "fig4.csv", "fig5.csv", "fig6.csv", "zeno_gap.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let files: Vec<&str> = doc["datasets"].as_array().unwrap().iter().map(|d| d["file"].as_str().unwrap()).collect();
    assert_eq!(files, ["fig2_N4.csv", "fig2_N5.csv", "fig4.csv", "fig3.csv", "fig5.csv", "fig6.csv", "zeno_gap.csv"]);
    for d in doc["datasets"].as_array().unwrap() {
        ExperimentConfig::from_value(d["config"].clone()).unwrap();
    }
    let fig5 = csv::Reader::from_path(dir.path().join("fig5.csv")).unwrap().records().count();
    assert_eq!(fig5, 9);
}
