//! The `lanechange` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use lanechange::scenario::{ScenarioConfig, PAPER_3AGENT_TOML};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lanechange"))
}

fn simulate(scenario: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("simulate").arg(scenario).arg("--out").arg(out).args(extra).output().unwrap()
}

fn write_scenario(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn short_run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), PAPER_3AGENT_TOML);
    let (trace, summary) = (dir.path().join("trace.csv"), dir.path().join("summary.json"));
    let out = simulate(&scenario, &trace, &["--max-time", "1.0", "--deterministic", "--summary", summary.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("t,agent_id,s,dy,dpsi,v,ax,delta,a_y,phase,admm_iters"));
    assert_eq!(lines.count(), 10 * 3);

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(json["steps"], 10);
    assert_eq!(json["max_wall_time_s"], 0.0);
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), PAPER_3AGENT_TOML);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(simulate(&scenario, &a, &["--max-time", "0.5", "--deterministic"]).status.success());
    assert!(simulate(&scenario, &b, &["--max-time", "0.5", "--deterministic", "--sequential"]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn invalid_scenario_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ScenarioConfig::paper_3agent();
    config.road.left_lane_band_m = [1.25, 1.25];
    let scenario = write_scenario(dir.path(), &config.to_toml_string().unwrap());
    let out = simulate(&scenario, &dir.path().join("t.csv"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("left_lane_band_m"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_scenario_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(&dir.path().join("nope.toml"), &dir.path().join("t.csv"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.toml"));
}
