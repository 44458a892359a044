use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rto_sim_cli::load_scenario;
use rto_sim_core::presets::reference_scenario;

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/paper_s5.json")
}

fn rto_sim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rto-sim"))
        .args(args)
        .env_remove("RTO_SIM_SEED")
        .output()
        .expect("binary runs")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn bundled_scenario_is_the_reference_world() {
    let loaded = load_scenario(&bundled()).unwrap();
    assert_eq!(loaded.scenario, reference_scenario());
    assert_eq!(loaded.runs.seed, Some(42));
    let commitments: Vec<u32> = loaded.scenario.contracts.iter().map(|c| c.commitment).collect();
    assert_eq!(commitments, vec![75, 75, 150]);
}

#[test]
fn validate_reports_ok() {
    let out = rto_sim(&["validate", bundled().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok (3 vessels, 3 products"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let s = bundled();
    for dir in [&a, &b] {
        let out = rto_sim(&[
            "run",
            s.to_str().unwrap(),
            "--runs",
            "30",
            "--seed",
            "5",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let fa = read_dir_sorted(&a);
    assert_eq!(fa, read_dir_sorted(&b));
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    for expected in [
        "runs.csv",
        "summary.json",
        "histogram_terminal_cost.csv",
        "histogram_utilization_C.csv",
    ] {
        assert!(names.contains(&expected), "{names:?}");
    }
    let runs = String::from_utf8(fa.iter().find(|(n, _)| n == "runs.csv").unwrap().1.clone()).unwrap();
    let header = runs.lines().next().unwrap();
    assert_eq!(
        header,
        "run_index,terminal_cost,V_A,u_A,d_A,V_B,u_B,d_B,V_C,u_C,d_C,n_pr,n_hl,n_rfq_A,n_rfq_B,n_rfq_C,n_po,in_flight,empty_draws"
    );
    assert_eq!(runs.lines().count(), 31);
    assert!(!runs.contains('\r'));
    let hist = String::from_utf8(
        fa.iter()
            .find(|(n, _)| n == "histogram_terminal_cost.csv")
            .unwrap()
            .1
            .clone(),
    )
    .unwrap();
    assert_eq!(hist.lines().next().unwrap(), "bin_left,bin_right,count");
    assert_eq!(hist.lines().count(), 101);
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let mut file: serde_json::Value = serde_json::from_str(&fs::read_to_string(bundled()).unwrap()).unwrap();
    file["runs"].as_object_mut().unwrap().remove("seed");
    let scenario = tmp.path().join("s.json");
    fs::write(&scenario, file.to_string()).unwrap();
    let run = |seed_env: Option<&str>, flag: Option<&str>, dir: &str| {
        let dir = tmp.path().join(dir);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_rto-sim"));
        cmd.args([
            "run",
            scenario.to_str().unwrap(),
            "--runs",
            "5",
            "--out",
            dir.to_str().unwrap(),
        ]);
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        match seed_env {
            Some(v) => cmd.env("RTO_SIM_SEED", v),
            None => cmd.env_remove("RTO_SIM_SEED"),
        };
        assert!(cmd.status().unwrap().success());
        fs::read(dir.join("runs.csv")).unwrap()
    };
    let env9 = run(Some("9"), None, "env9");
    assert_eq!(env9, run(None, Some("9"), "flag9"));
    assert_eq!(run(Some("1"), Some("9"), "both"), env9);
    assert_ne!(run(None, None, "zero"), env9);
}

#[test]
fn overrides_change_the_policy() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    let out = rto_sim(&[
        "run",
        bundled().to_str().unwrap(),
        "--runs",
        "10",
        "--policy",
        "dynamic",
        "--competition-slope",
        "0.10",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["policy"], "dynamic");
    assert_eq!(summary["competition_slope"], 0.1);
    assert_eq!(summary["seed"], 42);
    assert!(String::from_utf8_lossy(&out.stdout).contains("policy dynamic"));
}

#[test]
fn event_export_writes_one_log_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("ev");
    let out = rto_sim(&[
        "run",
        bundled().to_str().unwrap(),
        "--runs",
        "3",
        "--export-events",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    for i in 0..3 {
        let log = fs::read_to_string(dir.join(format!("events_{i}.csv"))).unwrap();
        assert_eq!(log.lines().next().unwrap(), "time,kind,pr,supplier,detail");
        assert!(log.lines().last().unwrap().starts_with("365,termination"));
        assert!(log.contains("pr_generation"));
    }
}

#[test]
fn zero_runs_is_rejected() {
    let out = rto_sim(&["run", bundled().to_str().unwrap(), "--runs", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_scenario_leaves_nothing_behind() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = tmp.path().join("bad.json");
    fs::write(&scenario, r#"{"schema_version": 7}"#).unwrap();
    let dir = tmp.path().join("out");
    let out = rto_sim(&["run", scenario.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported schema"));
    assert!(!dir.exists());
}

#[test]
fn compare_writes_grid_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("grid");
    let out = rto_sim(&[
        "compare",
        bundled().to_str().unwrap(),
        "--runs",
        "40",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.join("comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 7);
    assert!(table.starts_with("cell,policy,competition_slope,mean_cost,median_cost,sd_cost,mean_u_A,median_u_A"));
    for cell in [
        "naive_slope_0",
        "naive_slope_0_01",
        "naive_slope_0_1",
        "dynamic_slope_0",
        "dynamic_slope_0_1",
    ] {
        assert!(dir.join(cell).join("runs.csv").exists(), "{cell}");
    }
    let mean_cost = |row: &str| row.split(',').nth(3).unwrap().parse::<f64>().unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert!(mean_cost(rows[3]) <= mean_cost(rows[0]));
}

#[test]
fn self_comparison_gives_identical_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("self");
    let out = rto_sim(&[
        "compare",
        bundled().to_str().unwrap(),
        "--runs",
        "20",
        "--policies",
        "naive,naive",
        "--slopes",
        "0",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        read_dir_sorted(&dir.join("naive_slope_0")),
        read_dir_sorted(&dir.join("naive_slope_0_2"))
    );
}

#[test]
fn single_cell_comparison_is_refused() {
    let out = rto_sim(&[
        "compare",
        bundled().to_str().unwrap(),
        "--policies",
        "naive",
        "--slopes",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least two"));
}
