use std::path::Path;
use std::process::{Command, Output};

use pass_isac::experiment::{read_records, read_summary, strip_wall_time};
use pass_isac::{DesignSolution, Link, Method};

fn pass_isac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pass-isac"))
        .args(args)
        .output()
        .expect("run pass-isac")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn sweep(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec!["sweep", "--drops", "2", "--side-lengths", "10,20", "--weights", "0.5", "--out", out];
    args.extend_from_slice(extra);
    pass_isac(&args)
}

#[test]
fn design_prints_solution_json() {
    let out = pass_isac(&["design", "--user", "-7.5,1.25", "--target", "6,-2.5", "--weight", "0.5"]);
    let solution: DesignSolution = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(solution.link, Link::Downlink);
    assert_eq!(solution.method, Method::Pass);
    assert_eq!(solution.tx_layout.len(), 20);
    assert!(solution.metrics.is_valid());
    assert!((solution.metrics.weighted - 7.526074005501481).abs() < 1e-9);
}

#[test]
fn design_uplink_baseline() {
    let out = pass_isac(&[
        "design", "--user", "3,1", "--target", "-4,2,1", "--link", "ul", "--method", "baseline", "--compact",
    ]);
    let text = stdout(&out);
    assert_eq!(text.trim().lines().count(), 1);
    let solution: DesignSolution = serde_json::from_str(&text).unwrap();
    assert_eq!(solution.method, Method::Baseline);
    assert!(solution.tx_weights.is_some());
}

#[test]
fn design_rejects_malformed_point() {
    let out = pass_isac(&["design", "--user", "1", "--target", "0,0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("x,y"));
}

#[test]
fn defaults_reflect_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "p_max_dbm = 20\ndrops = 7\n").unwrap();
    let out = pass_isac(&["defaults", "--config", cfg.to_str().unwrap(), "--experiment", "rate-region"]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["experiment"]["drops"], 7);
    assert_eq!(json["experiment"]["kind"], "rate-region");
    assert!((json["system"]["p_max"].as_f64().unwrap() - 0.1).abs() < 1e-15);
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "weights = [1.5]\n").unwrap();
    let out = pass_isac(&["defaults", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("weights"));

    std::fs::write(&cfg, "carrier_frequncy_hz = 1e9\n").unwrap();
    let out = pass_isac(&["defaults", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("carrier_frequncy_hz"));
}

#[test]
fn sweep_writes_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&sweep(dir.path(), &[]));
    let records = read_records(&dir.path().join("records.csv")).unwrap();
    assert_eq!(records.len(), 2 * 2 * 2);
    let summary = read_summary(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.len(), 4);
    assert!(summary.iter().all(|r| r.drops == 2));
}

#[test]
fn sweep_method_and_link_flags() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&sweep(dir.path(), &["--methods", "pass", "--link", "ul"]));
    let records = read_records(&dir.path().join("records.csv")).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r.method == Method::Pass && r.link == Link::Uplink));
    assert!(records.iter().all(|r| r.sensing_power_w.is_some()));
}

#[test]
fn sweep_is_repeatable() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    stdout(&sweep(a.path(), &["--seed", "3"]));
    stdout(&sweep(b.path(), &["--seed", "3"]));
    let read = |d: &Path| strip_wall_time(&std::fs::read_to_string(d.join("records.csv")).unwrap());
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn resume_keeps_existing_records() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&sweep(dir.path(), &[]));
    let before = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    stdout(&sweep(dir.path(), &["--resume"]));
    let after = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert_eq!(before, after);
}

#[test]
fn region_sweeps_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = pass_isac(&[
        "region", "--drops", "1", "--weights", "0,0.5,1", "--out", dir.path().to_str().unwrap(),
    ]);
    stdout(&out);
    let summary = read_summary(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.len(), 6);
    assert!(summary.iter().all(|r| r.link == Link::Uplink && r.side_length == 40.0));
}

#[test]
fn validate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = pass_isac(&[
        "validate",
        "--scenes", "3",
        "--global-scenes", "1",
        "--jensen-draws", "500",
        "--out", dir.path().to_str().unwrap(),
    ]);
    let text = stdout(&out);
    assert!(text.contains("[PASS] cascade-factorization"));
    let csv = std::fs::read_to_string(dir.path().join("validation.csv")).unwrap();
    assert!(csv.starts_with("name,inputs_digest,passed,gap"));
    assert!(csv.lines().count() > 10);
}

#[test]
fn rejects_zero_drops() {
    let dir = tempfile::tempdir().unwrap();
    let out = sweep(dir.path(), &["--drops", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("drops"));
}
