use std::path::Path;
use std::process::{Command, Output};

fn slicer(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slicer"))
        .args(args)
        .env("SLICER_OUT_DIR", out_dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn run_writes_reports_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = slicer(&["run", "--users", "5", "--seed", "2", "--no-sim"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for m in ["slicer", "geometric_center", "kmeans"] {
        assert!(dir.path().join(format!("report.{m}.json")).is_file());
    }
    let csv = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert!(csv.starts_with("method,metric,n,mean,ci95_low,ci95_high\n"));

    let reports: Vec<String> = ["slicer", "kmeans"]
        .iter()
        .map(|m| dir.path().join(format!("report.{m}.json")).to_string_lossy().into_owned())
        .collect();
    let out = slicer(&["compare", &reports[0], &reports[1]], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 7);
}

#[test]
fn generate_then_solve_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("in.json");
    let out = slicer(&["generate", "--users", "5", "--seed", "3", "-o", scenario.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let out = slicer(&["solve", "--scenario", scenario.to_str().unwrap(), "--method", "slicer"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("solution.slicer.json").is_file());
    assert!(dir.path().join("deployment.json").is_file());
}

#[test]
fn infeasible_scenario_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let slices = dir.path().join("slices.json");
    std::fs::write(
        &slices,
        r#"[{"id":0,"kind":"eMBB","throughput_demand":2e9,"max_mean_delay":0.005,"target_ber":1e-5}]"#,
    )
    .unwrap();
    let out = slicer(&["solve", "--users", "3", "--slices", slices.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    assert!(dir.path().join("solution.slicer.json").is_file());
}

#[test]
fn sequence_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let out = slicer(&["sequence", "--users", "5", "--k-max", "2", "--dt", "30"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("snapshot_001/solution.slicer.json").is_file());
    assert!(dir.path().join("sequence.csv").is_file());

    let out = slicer(&["export-lp", "--users", "5"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().ends_with("End\n"));

    let out = slicer(&["mcs-table", "--ber", "1e-5"], dir.path());
    assert!(out.status.success());
    let table: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(table.as_array().unwrap().len(), 9);

    assert!(!slicer(&["sequence", "--k-max", "0"], dir.path()).status.success());
}
