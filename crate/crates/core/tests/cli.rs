use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use occsafe::scenario::load_scenario;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn occsafe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_occsafe"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_trajectory(
    dir: &Path,
    points: impl Iterator<Item = (f64, f64, f64, f64, f64)>,
) -> PathBuf {
    let samples: Vec<serde_json::Value> = points
        .map(|(t, x, y, heading, v)| serde_json::json!({"t": t, "x": x, "y": y, "heading": heading, "v": v}))
        .collect();
    let path = dir.join("traj.json");
    std::fs::write(&path, serde_json::to_string(&samples).unwrap()).unwrap();
    path
}

#[test]
fn missing_scenario_file() {
    let out = occsafe(&["simulate", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/scenario.json"));
}

#[test]
fn unaware_run_reports_the_collision() {
    let scn = fixture("t_junction.json");
    let out = occsafe(&[
        "simulate",
        "--scenario",
        scn.to_str().unwrap(),
        "--occlusion-aware",
        "false",
    ]);
    assert_eq!(code(&out), 2);
    let summary = stdout_json(&out);
    assert_eq!(summary["collision"], true);
    assert_eq!(summary["occlusion_aware"], false);
}

#[test]
fn aware_run_succeeds() {
    let scn = fixture("t_junction.json");
    let out = occsafe(&["simulate", "--scenario", scn.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let summary = stdout_json(&out);
    assert_eq!(summary["collision"], false);
    assert_eq!(summary["scenario"], "t_junction");
}

#[test]
fn emit_writes_snapshots_and_log() {
    let scn = fixture("t_junction_clear.json");
    let dir = tempfile::tempdir().unwrap();
    let out = occsafe(&[
        "simulate",
        "--scenario",
        scn.to_str().unwrap(),
        "--duration",
        "0.3",
        "--emit",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    for k in 0..3 {
        assert!(dir.path().join(format!("step_{k:05}.json")).exists());
        assert!(dir.path().join(format!("step_{k:05}.svg")).exists());
    }
    let log: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("simlog.json")).unwrap())
            .unwrap();
    assert_eq!(log["records"].as_array().unwrap().len(), 4);
}

#[test]
fn parked_far_away_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let traj = write_trajectory(
        dir.path(),
        (0..=30).map(|k| (k as f64 * 0.1, 200.0, 200.0, 0.0, 0.0)),
    );
    let scn = fixture("t_junction.json");
    let out = occsafe(&[
        "verify",
        "--scenario",
        scn.to_str().unwrap(),
        "--trajectory",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["result"]["verdict"], "safe");
}

/// Starts behind the container, then cuts straight into the main road and waits
/// there, where a hidden car would arrive.
#[test]
fn entering_the_hidden_lane_is_unsafe() {
    let scn_path = fixture("t_junction.json");
    let scn = load_scenario(&scn_path).unwrap();
    let start = scn.ego.path.point_at(scn.ego.s0);
    let heading = scn.ego.path.heading_at(scn.ego.s0);
    let dir = tempfile::tempdir().unwrap();
    let traj = write_trajectory(
        dir.path(),
        [
            (0.0, start.x, start.y, heading, 0.0),
            (1.0, -3.0, 1.75, PI, 0.0),
            (3.0, -3.0, 1.75, PI, 0.0),
        ]
        .into_iter(),
    );
    let out = occsafe(&[
        "verify",
        "--scenario",
        scn_path.to_str().unwrap(),
        "--trajectory",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let result = &stdout_json(&out)["result"];
    assert_eq!(result["verdict"], "unsafe");
    assert!(
        result["source"].as_str().unwrap().starts_with("edge:"),
        "{result}"
    );
}

#[test]
fn short_trajectory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let traj = write_trajectory(
        dir.path(),
        (0..=5).map(|k| (k as f64 * 0.1, 200.0, 200.0, 0.0, 0.0)),
    );
    let scn = fixture("t_junction.json");
    let out = occsafe(&[
        "verify",
        "--scenario",
        scn.to_str().unwrap(),
        "--trajectory",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn predict_prints_a_timeline() {
    let scn = fixture("t_junction.json");
    let out = occsafe(&["predict", "--scenario", scn.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["timeline"]["steps"].as_array().unwrap().len(), 24);
    assert!(!v["edges"].as_array().unwrap().is_empty());
}
