//! Fixed-step closed-loop simulation of the ego vehicle among scripted obstacles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geom::{intersect_polygons, point_segment_distance, polygons_overlap, Polygon2, Pose2};
use crate::lanelet::LanePosition;
use crate::planner::{
    plan_step, EgoState, PlanError, PlanInput, PlanKind, Trajectory, TrajectoryState, Verdict,
};
use crate::prediction::{predict_all, OccupancyTimeline, PredictionError, VisibleObstacle};
use crate::render::{NamedPolygon, Snapshot};
use crate::scenario::{Scenario, SCHEMA_VERSION};
use crate::sensing::{
    classify_edges, compute_fov, extract_border_segments, CriticalEdge, FieldOfView, SensingError,
};

/// Rear axle position as a fraction of the vehicle length behind its center.
const REAR_AXLE_OFFSET: f64 = 0.3;
/// Spacing of boundary samples used to decide whether an obstacle is visible.
const VISIBILITY_SAMPLE_STEP: f64 = 0.25;
const VISIBILITY_TOL: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("t={t:.3}: {source}")]
    Sensing {
        t: f64,
        #[source]
        source: SensingError,
    },
    #[error("t={t:.3}: {source}")]
    Prediction {
        t: f64,
        #[source]
        source: PredictionError,
    },
    #[error("t={t:.3}: {source}")]
    Planning {
        t: f64,
        #[source]
        source: PlanError,
    },
}

#[derive(Clone, Debug, Default)]
pub struct RunFlags {
    pub occlusion_aware: bool,
    /// Logged only; the loop itself is deterministic.
    pub seed: u64,
    /// Keep one [`Snapshot`] per step in the result.
    pub record_snapshots: bool,
    /// Overrides the scenario duration.
    pub duration: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoRecord {
    pub s_m: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub heading_rad: f64,
    pub v_mps: f64,
    pub a_mps2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub trajectory_id: u64,
    pub kind: PlanKind,
    pub verdict: Verdict,
    pub edges_total: usize,
    pub edges_relevant: usize,
    /// FNV-1a digest of each source's polygons over the horizon.
    pub source_digests: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub t_s: f64,
    pub ego: EgoRecord,
    pub visible: Vec<String>,
    /// Absent on the final record, which only closes the run.
    pub plan: Option<PlanRecord>,
    pub collision: bool,
    pub colliding_with: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub collision: bool,
    pub first_collision_s: Option<f64>,
    /// Smallest gap between the ego footprint and any obstacle.
    pub min_distance_m: Option<f64>,
    /// First time the ego is at rest after starting in motion.
    pub time_to_stop_s: Option<f64>,
    pub min_speed_mps: f64,
    pub max_speed_mps: f64,
    pub distance_travelled_m: f64,
    pub velocity_profile_mps: Vec<f64>,
    pub emergency_steps: usize,
    pub fallback_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub schema_version: u32,
    pub scenario: String,
    pub occlusion_aware: bool,
    pub seed: u64,
    pub dt_s: f64,
    pub records: Vec<StepRecord>,
    pub metrics: SimMetrics,
}

impl SimLog {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("log serializes")
    }
}

pub struct SimRun {
    pub log: SimLog,
    pub snapshots: Vec<Snapshot>,
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn source_digests(timeline: &OccupancyTimeline) -> BTreeMap<String, String> {
    let mut per_source: BTreeMap<String, Vec<&Polygon2>> = BTreeMap::new();
    for step in &timeline.steps {
        for (src, p) in step.polygons() {
            per_source.entry(src.to_string()).or_default().push(p);
        }
    }
    per_source
        .into_iter()
        .map(|(k, v)| {
            let bytes = serde_json::to_vec(&v).expect("polygons serialize");
            (k, format!("{:016x}", fnv1a(&bytes)))
        })
        .collect()
}

/// Distance between two polygons; zero when they overlap.
pub fn polygon_distance(a: &Polygon2, b: &Polygon2) -> f64 {
    if polygons_overlap(a, b) {
        return 0.0;
    }
    let one_way = |p: &Polygon2, q: &Polygon2| {
        p.vertices()
            .iter()
            .flat_map(|&v| {
                q.edges()
                    .map(move |(e0, e1)| point_segment_distance(v, e0, e1))
            })
            .fold(f64::INFINITY, f64::min)
    };
    one_way(a, b).min(one_way(b, a))
}

fn is_visible(rect: &Polygon2, fov: &FieldOfView) -> bool {
    rect.edges().any(|(a, b)| {
        let n = (a.distance(b) / VISIBILITY_SAMPLE_STEP).ceil().max(1.0) as usize;
        (0..=n).any(|i| fov.contains(a.lerp(b, i as f64 / n as f64), VISIBILITY_TOL))
    })
}

/// Closest visible obstacle ahead on the ego path, as `(gap, speed along path)`.
fn find_leader(
    scn: &Scenario,
    cur: &TrajectoryState,
    visible: &[VisibleObstacle],
) -> Option<(f64, f64)> {
    let path = &scn.ego.path;
    visible
        .iter()
        .filter_map(|o| {
            let (s, d, _) = path.project(o.pose.position);
            let lateral_ok = d.abs() <= path.half_width_at(s) + 0.5 * o.width;
            if !(lateral_ok && s > cur.s && s <= path.length()) {
                return None;
            }
            let gap = s - cur.s - 0.5 * (scn.ego.shape.length + o.length);
            let v = o.v * (o.pose.heading - path.heading_at(s)).cos();
            Some((gap, v.max(0.0)))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// Overlaps of the route lanelets with lanelets crossing them.
fn conflict_areas(scn: &Scenario) -> Vec<Polygon2> {
    let mut out = Vec::new();
    for &r in &scn.ego.route {
        let Ok(rl) = scn.map.get(r) else { continue };
        for other in scn.map.lanelets() {
            if scn.map.crosses(other.id, r) {
                out.extend(intersect_polygons(rl.polygon(), other.polygon()));
            }
        }
    }
    out
}

fn ego_state_at(scn: &Scenario, t: f64, s: f64, v: f64) -> TrajectoryState {
    let path = &scn.ego.path;
    TrajectoryState {
        t,
        s,
        ego: EgoState {
            pose: Pose2::new(path.point_at(s), path.heading_at(s)),
            v,
            a: 0.0,
        },
    }
}

/// What the ego knows at time `t` when standing at `ego_pose`, arc length `ego_s`
/// along its route.
pub struct Perception {
    pub fov: FieldOfView,
    pub visible: Vec<VisibleObstacle>,
    pub edges: Vec<CriticalEdge>,
    pub timeline: OccupancyTimeline,
}

pub fn perceive(
    scn: &Scenario,
    ego_pose: Pose2,
    ego_s: f64,
    t: f64,
    occlusion_aware: bool,
) -> Result<Perception, SimError> {
    let origin = ego_pose.position;
    let dyn_states: Vec<(Polygon2, Pose2, f64)> = scn
        .dynamic_obstacles
        .iter()
        .map(|o| {
            let (pose, v) = o.state_at(t);
            (o.rectangle_at(t), pose, v)
        })
        .collect();
    // occluders that contain the sensor origin (after a collision) are ignored
    let occluders: Vec<Polygon2> = scn
        .static_obstacles
        .iter()
        .map(|(_, p)| p.clone())
        .chain(dyn_states.iter().map(|(r, _, _)| r.clone()))
        .filter(|p| !p.contains_point(origin, 0.0))
        .collect();
    let fov = compute_fov(ego_pose, &scn.sensor, &occluders)
        .map_err(|source| SimError::Sensing { t, source })?;

    let visible: Vec<VisibleObstacle> = scn
        .dynamic_obstacles
        .iter()
        .zip(&dyn_states)
        .filter(|(_, (rect, _, _))| is_visible(rect, &fov))
        .map(|(o, (_, pose, v))| VisibleObstacle {
            id: o.id.clone(),
            pose: *pose,
            v: *v,
            length: o.length,
            width: o.width,
        })
        .collect();

    let edges = if occlusion_aware {
        let segments = extract_border_segments(&fov, &scn.map);
        let path = &scn.ego.path;
        let rear_s = (ego_s - REAR_AXLE_OFFSET * scn.ego.shape.length).max(0.0);
        let rear_id = path.lanelet_at(rear_s);
        let rear = LanePosition {
            lanelet_id: rear_id,
            s: rear_s - path.offset_of(rear_id).unwrap_or(0.0),
            d: 0.0,
        };
        classify_edges(&segments, &scn.map, &scn.ego.route, rear, &fov)
    } else {
        Vec::new()
    };

    let timeline = predict_all(
        t,
        &edges,
        &visible,
        &scn.static_obstacles,
        &scn.map,
        &scn.prediction,
    )
    .map_err(|source| SimError::Prediction { t, source })?;
    Ok(Perception {
        fov,
        visible,
        edges,
        timeline,
    })
}

pub fn run(scn: &Scenario, flags: &RunFlags) -> Result<SimRun, SimError> {
    let dt = scn.dt;
    let duration = flags.duration.unwrap_or(scn.duration);
    let n_steps = (duration / dt).round() as usize;
    let conflicts = conflict_areas(scn);
    let shape = scn.ego.shape;

    let mut cur = ego_state_at(scn, 0.0, scn.ego.s0, scn.ego.v0);
    let mut committed: Option<Trajectory> = None;
    let mut trajectory_id = 0u64;
    let mut records = Vec::with_capacity(n_steps + 1);
    let mut snapshots = Vec::new();
    let mut min_distance: Option<f64> = None;

    for k in 0..=n_steps {
        let t = k as f64 * dt;
        cur.t = t;
        let ego_rect = shape.rectangle(cur.ego.pose);
        let dyn_rects: Vec<(String, Polygon2, Pose2, f64)> = scn
            .dynamic_obstacles
            .iter()
            .map(|o| {
                let (pose, v) = o.state_at(t);
                (o.id.clone(), o.rectangle_at(t), pose, v)
            })
            .collect();

        let mut colliding_with = Vec::new();
        for (id, rect, _, _) in &dyn_rects {
            let d = polygon_distance(&ego_rect, rect);
            min_distance = Some(min_distance.map_or(d, |m: f64| m.min(d)));
            if polygons_overlap(&ego_rect, rect) {
                colliding_with.push(id.clone());
            }
        }
        for (id, poly) in &scn.static_obstacles {
            if polygons_overlap(&ego_rect, poly) {
                colliding_with.push(id.clone());
            }
        }
        let ego = EgoRecord {
            s_m: cur.s,
            x_m: cur.ego.pose.position.x,
            y_m: cur.ego.pose.position.y,
            heading_rad: cur.ego.pose.heading,
            v_mps: cur.ego.v,
            a_mps2: 0.0,
        };
        let mut record = StepRecord {
            k,
            t_s: t,
            ego,
            visible: Vec::new(),
            plan: None,
            collision: !colliding_with.is_empty(),
            colliding_with,
        };
        if k == n_steps {
            records.push(record);
            break;
        }

        let Perception {
            fov,
            visible,
            edges,
            timeline,
        } = perceive(scn, cur.ego.pose, cur.s, t, flags.occlusion_aware)?;

        let leader = find_leader(scn, &cur, &visible);
        let input = PlanInput {
            current: cur,
            path: &scn.ego.path,
            timeline: &timeline,
            previous: committed.as_ref(),
            leader,
            conflict_areas: &conflicts,
        };
        let outcome = plan_step(&input, &scn.planner, &shape)
            .map_err(|source| SimError::Planning { t, source })?;
        if !matches!(outcome.kind, PlanKind::Fallback) {
            trajectory_id += 1;
        }
        let next = outcome.trajectory.states[1];
        record.ego.a_mps2 = outcome.trajectory.states[0].ego.a;
        record.visible = visible.iter().map(|o| o.id.clone()).collect();
        record.plan = Some(PlanRecord {
            trajectory_id,
            kind: outcome.kind.clone(),
            verdict: outcome.verdict.clone(),
            edges_total: edges.len(),
            edges_relevant: edges.iter().filter(|e| e.relevant).count(),
            source_digests: source_digests(&timeline),
        });

        if flags.record_snapshots {
            snapshots.push(Snapshot {
                schema_version: SCHEMA_VERSION,
                k,
                t_s: t,
                lanelets: scn
                    .map
                    .lanelets()
                    .map(|l| NamedPolygon {
                        id: l.id.to_string(),
                        polygon: l.polygon().clone(),
                    })
                    .collect(),
                static_obstacles: scn
                    .static_obstacles
                    .iter()
                    .map(|(id, p)| NamedPolygon {
                        id: id.clone(),
                        polygon: p.clone(),
                    })
                    .collect(),
                dynamic_obstacles: dyn_rects
                    .iter()
                    .map(|(id, r, _, _)| NamedPolygon {
                        id: id.clone(),
                        polygon: r.clone(),
                    })
                    .collect(),
                fov: Some(fov.polygon.clone()),
                edges: edges.clone(),
                occupancies: timeline.clone(),
                ego: cur.ego,
                ego_footprint: ego_rect.clone(),
                trajectory: outcome
                    .trajectory
                    .states
                    .iter()
                    .map(|s| s.ego.pose.position)
                    .collect(),
                kind: outcome.kind.clone(),
                verdict: outcome.verdict.clone(),
            });
        }
        records.push(record);

        cur = next;
        committed = Some(outcome.trajectory);
    }

    let metrics = compute_metrics(&records, scn.ego.s0, min_distance);
    Ok(SimRun {
        log: SimLog {
            schema_version: SCHEMA_VERSION,
            scenario: scn.name.clone(),
            occlusion_aware: flags.occlusion_aware,
            seed: flags.seed,
            dt_s: dt,
            records,
            metrics,
        },
        snapshots,
    })
}

fn compute_metrics(records: &[StepRecord], s0: f64, min_distance: Option<f64>) -> SimMetrics {
    let speeds: Vec<f64> = records.iter().map(|r| r.ego.v_mps).collect();
    let first_collision = records.iter().find(|r| r.collision).map(|r| r.t_s);
    let moving_at_start = speeds.first().is_some_and(|&v| v > 0.0);
    let time_to_stop = if moving_at_start {
        records.iter().find(|r| r.ego.v_mps == 0.0).map(|r| r.t_s)
    } else {
        None
    };
    let count = |f: fn(&PlanKind) -> bool| {
        records
            .iter()
            .filter(|r| r.plan.as_ref().is_some_and(|p| f(&p.kind)))
            .count()
    };
    SimMetrics {
        collision: first_collision.is_some(),
        first_collision_s: first_collision,
        min_distance_m: min_distance,
        time_to_stop_s: time_to_stop,
        min_speed_mps: speeds.iter().copied().fold(f64::INFINITY, f64::min),
        max_speed_mps: speeds.iter().copied().fold(0.0, f64::max),
        distance_travelled_m: records.last().map_or(0.0, |r| r.ego.s_m - s0),
        velocity_profile_mps: speeds,
        emergency_steps: count(|k| matches!(k, PlanKind::Emergency)),
        fallback_steps: count(|k| matches!(k, PlanKind::Fallback)),
    }
}
