use std::path::Path;
use std::process::{Command, Output};

fn ngp_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ngp-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn default_config_loads_back() {
    let out = ngp_sim(&["default-config"]);
    assert!(out.status.success());
    let config = ngp_core::harness::ScenarioConfig::from_json(&stdout(&out)).unwrap();
    assert_eq!(config, ngp_core::harness::room_scenario());
}

#[test]
fn simulate_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("room.json");
    std::fs::write(&config, stdout(&ngp_sim(&["default-config"]))).unwrap();
    let out_dir = dir.path().join("out");
    let out = ngp_sim(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--repetitions",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = stdout(&out);
    for label in ["los_2m", "los_4m", "los_8m", "nlos_2m", "nlos_4m", "nlos_8m"] {
        assert!(table.contains(label));
    }
    let result = ngp_core::harness::parse_csv(&out_dir.join("room.csv")).unwrap();
    assert!(result.per_rsta.iter().all(|r| r.samples.len() == 3));
    assert!(out_dir.join("room_summary.txt").exists());
}

#[test]
fn compare_prints_reference_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = ngp_sim(&["compare", "--out", dir.path().to_str().unwrap(), "--repetitions", "5"]);
    assert!(out.status.success());
    let table = stdout(&out);
    assert!(table.contains("3GPP Sub-6 GHz             2.00     8.25    15.50    30.00"));
    assert!(table.contains("Bluetooth 5.1             30.00    37.50    46.50    80.00"));
    assert_eq!(std::fs::read_to_string(dir.path().join("comparison.txt")).unwrap(), table);
    assert!(Path::new(&dir.path().join("compare_los_14.2m.csv")).exists());
}

#[test]
fn bad_config_reports_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    let text = stdout(&ngp_sim(&["default-config"])).replacen("\"repetitions\": 100", "\"repetitions\": -4", 1);
    std::fs::write(&config, text).unwrap();
    let out = ngp_sim(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("repetitions"));
}

#[test]
fn missing_config_file_fails() {
    let out = ngp_sim(&["simulate", "--config", "/nonexistent/x.json", "--out", "/tmp"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/x.json"));
}
