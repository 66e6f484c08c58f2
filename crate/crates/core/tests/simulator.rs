use std::path::PathBuf;

use occsafe::geom::Polygon2;
use occsafe::lanelet::LaneletId;
use occsafe::planner::{advance, EgoShape, EgoState};
use occsafe::render::{emit_snapshots, render_svg, NamedPolygon, Snapshot};
use occsafe::scenario::{load_scenario, parse_scenario, Scenario, ScenarioError};
use occsafe::sim::{run, RunFlags};

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn fixture(name: &str) -> Scenario {
    load_scenario(&fixture_path(name)).unwrap()
}

fn aware() -> RunFlags {
    RunFlags {
        occlusion_aware: true,
        ..Default::default()
    }
}

/// One straight lanelet; `successors` is spliced in verbatim.
fn single_lanelet(successors: &str) -> String {
    format!(
        r#"{{
  "schema_version": 1,
  "name": "single",
  "map": {{"lanelets": [{{
    "id": 1,
    "left_bound": [[0, 1.75], [100, 1.75]],
    "right_bound": [[0, -1.75], [100, -1.75]],
    "successors": {successors},
    "speed_limit_mps": 10.0
  }}]}},
  "ego": {{"route": [1], "s0_m": 5.0, "v0_mps": 5.0}},
  "sim": {{"duration_s": 2.0, "dt_s": 0.1}}
}}"#
    )
}

#[test]
fn minimal_scenario_loads() {
    let scn = parse_scenario(&single_lanelet("[]")).unwrap();
    assert_eq!(scn.ego.route, vec![LaneletId(1)]);
    assert!((scn.ego.path.length() - 100.0).abs() < 1e-9);
    assert!(scn.static_obstacles.is_empty() && scn.dynamic_obstacles.is_empty());
    let out = run(&scn, &aware()).unwrap();
    assert_eq!(out.log.records.len(), 21);
    assert!(!out.log.metrics.collision);
}

#[test]
fn dangling_successor_names_the_lanelet() {
    let err = parse_scenario(&single_lanelet("[7]")).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains('7') && msg.contains('1'), "{msg}");
}

#[test]
fn malformed_input_is_a_schema_error() {
    let text = single_lanelet("[]").replace("\"s0_m\"", "\"s0\"");
    assert!(matches!(
        parse_scenario(&text),
        Err(ScenarioError::Schema { .. })
    ));
    let text = single_lanelet("[]").replace("\"s0_m\": 5.0", "\"s0_m\": 500.0");
    match parse_scenario(&text) {
        Err(ScenarioError::Invariant { id, .. }) => assert_eq!(id, "ego"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn t_junction_fixture_contents() {
    let scn = fixture("t_junction.json");
    for l in scn.map.lanelets() {
        assert_eq!(l.speed_limit, 14.0);
    }
    assert!(scn.static_obstacles.iter().any(|(id, _)| id == "container"));
    assert!(!scn.dynamic_obstacles.is_empty());
}

#[test]
fn runs_are_deterministic() {
    for name in ["t_junction.json", "x_junction_turning.json"] {
        let scn = fixture(name);
        let a = run(&scn, &aware()).unwrap().log.to_json();
        let b = run(&scn, &aware()).unwrap().log.to_json();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn ego_follows_the_logged_accelerations() {
    let scn = fixture("x_junction_crossing.json");
    let log = run(&scn, &aware()).unwrap().log;
    for w in log.records.windows(2) {
        let (a, b) = (&w[0].ego, &w[1].ego);
        let (s1, v1) = advance(a.s_m, a.v_mps, a.a_mps2, log.dt_s);
        assert!(
            (b.s_m - s1).abs() < 1e-9 && (b.v_mps - v1).abs() < 1e-9,
            "step {}",
            w[0].k
        );
        assert!(a.a_mps2.abs() <= scn.planner.a_hard + 1e-12);
        let p = scn.ego.path.point_at(b.s_m);
        assert!((b.x_m - p.x).abs() < 1e-9 && (b.y_m - p.y).abs() < 1e-9);
    }
}

#[test]
fn aware_runs_are_collision_free() {
    for name in [
        "t_junction.json",
        "t_junction_clear.json",
        "x_junction_crossing.json",
        "x_junction_turning.json",
    ] {
        let log = run(&fixture(name), &aware()).unwrap().log;
        assert!(!log.metrics.collision, "{name}");
        assert!(log.records.iter().all(|r| !r.collision));
        // every intended plan was verified
        for r in &log.records {
            if let Some(p) = &r.plan {
                if !matches!(p.kind, occsafe::planner::PlanKind::Emergency) {
                    assert!(p.verdict.is_safe(), "{name} step {}", r.k);
                }
            }
        }
    }
}

#[test]
fn unaware_run_hits_the_hidden_car() {
    let log = run(&fixture("t_junction.json"), &RunFlags::default())
        .unwrap()
        .log;
    assert!(log.metrics.collision);
    assert!(log.metrics.first_collision_s.is_some());
}

#[test]
fn snapshot_round_trip_renders_identically() {
    let scn = fixture("t_junction.json");
    let flags = RunFlags {
        record_snapshots: true,
        duration: Some(1.5),
        ..aware()
    };
    let out = run(&scn, &flags).unwrap();
    assert_eq!(out.snapshots.len(), 15);
    let dir = tempfile::tempdir().unwrap();
    emit_snapshots(&out.snapshots, dir.path()).unwrap();
    for snap in &out.snapshots {
        let stem = format!("step_{:05}", snap.k);
        let json = std::fs::read_to_string(dir.path().join(format!("{stem}.json"))).unwrap();
        let svg = std::fs::read_to_string(dir.path().join(format!("{stem}.svg"))).unwrap();
        let back: Snapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(render_svg(&back), svg);
    }
}

#[test]
fn hazard_layers_match_relevant_edges() {
    let scn = fixture("t_junction.json");
    let flags = RunFlags {
        record_snapshots: true,
        duration: Some(1.1),
        ..aware()
    };
    let out = run(&scn, &flags).unwrap();
    let snap = out
        .snapshots
        .iter()
        .find(|s| (s.t_s - 1.0).abs() < 1e-9)
        .unwrap();
    let relevant = snap.edges.iter().filter(|e| e.relevant).count();
    assert!(relevant > 0);
    let svg = render_svg(snap);
    assert_eq!(svg.matches("class=\"hazard edge\"").count(), relevant);
    assert_eq!(svg.matches("<line ").count(), snap.edges.len());
}

#[test]
fn empty_scene_svg_is_map_only() {
    let scn = parse_scenario(&single_lanelet("[]")).unwrap();
    let lanelets = scn
        .map
        .lanelets()
        .map(|l| NamedPolygon {
            id: l.id.to_string(),
            polygon: l.polygon().clone(),
        })
        .collect();
    let pose = occsafe::geom::Pose2::new(scn.ego.path.point_at(5.0), 0.0);
    let ego = EgoState {
        pose,
        v: 0.0,
        a: 0.0,
    };
    let foot: Polygon2 = EgoShape::default().rectangle(pose);
    let svg = render_svg(&Snapshot::map_only(lanelets, ego, foot));
    assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    assert_eq!(svg.matches("<path ").count(), 2, "one lanelet and the ego");
    assert!(!svg.contains("id=\"fov\"") && !svg.contains("class=\"hazard"));
    assert!(!svg.contains("<line ") && !svg.contains("<polyline"));
}
