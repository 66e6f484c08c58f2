//! Native JSON scenario schema and its validated, in-memory form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::{Point2, Polygon2, Pose2};
use crate::lanelet::{Lane, Lanelet, LaneletId, LaneletMap, MapError};
use crate::occupancy::{DynamicsAssumptions, FanParams};
use crate::planner::{EgoShape, PlannerConfig};
use crate::prediction::{HiddenObstaclePrior, PredictionConfig};
use crate::sensing::SensorConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invariant violated for {id}: {message}")]
    Invariant { id: String, message: String },
}

impl From<MapError> for ScenarioError {
    fn from(e: MapError) -> Self {
        let id = match &e {
            MapError::UnknownLanelet(id) => format!("lanelet {id}"),
            MapError::DanglingReference { to, .. } => format!("lanelet {to}"),
            MapError::InvalidLanelet { id, .. } | MapError::OutsideLanelet { id, .. } => {
                format!("lanelet {id}")
            }
            MapError::RangeOutsideLane { .. } | MapError::InvalidLane => "route".to_string(),
        };
        ScenarioError::Invariant {
            id,
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneletSpec {
    pub id: u32,
    pub left_bound: Vec<Point2>,
    pub right_bound: Vec<Point2>,
    #[serde(default)]
    pub successors: Vec<u32>,
    pub speed_limit_mps: f64,
    #[serde(default)]
    pub has_priority_over: Vec<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub lanelets: Vec<LaneletSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticObstacleSpec {
    pub id: String,
    pub polygon: Vec<Point2>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedPose {
    pub t_s: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub heading_rad: f64,
    pub v_mps: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionSpec {
    /// Explicit states, linearly interpolated.
    Trajectory { states: Vec<TimedPose> },
    /// Constant speed along the centerline of a lanelet chain, starting at arc
    /// length `s0_m`.
    LaneFollowing {
        route: Vec<u32>,
        s0_m: f64,
        v_mps: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicObstacleSpec {
    pub id: String,
    pub length_m: f64,
    pub width_m: f64,
    pub motion: MotionSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoSpec {
    pub route: Vec<u32>,
    pub s0_m: f64,
    pub v0_mps: f64,
    #[serde(default = "default_length")]
    pub length_m: f64,
    #[serde(default = "default_width")]
    pub width_m: f64,
}

fn default_length() -> f64 {
    4.5
}
fn default_width() -> f64 {
    1.8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    #[serde(default = "default_range")]
    pub range_m: f64,
    #[serde(default = "default_resolution")]
    pub angular_resolution_deg: f64,
}

fn default_range() -> f64 {
    50.0
}
fn default_resolution() -> f64 {
    1.0
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec {
            range_m: default_range(),
            angular_resolution_deg: default_resolution(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSpec {
    pub v_des_mps: f64,
    pub a_comf_mps2: f64,
    pub a_hard_mps2: f64,
    pub a_failsafe_mps2: f64,
    pub forbid_stop_in_conflict_area: bool,
}

impl Default for PlannerSpec {
    fn default() -> Self {
        let d = PlannerConfig::default();
        PlannerSpec {
            v_des_mps: d.v_des,
            a_comf_mps2: d.a_comf,
            a_hard_mps2: d.a_hard,
            a_failsafe_mps2: d.a_failsafe,
            forbid_stop_in_conflict_area: d.forbid_stop_in_conflict,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictionSpec {
    pub t_f_s: f64,
    pub fan_segments: u32,
    pub a_max_mps2: f64,
    /// Engine-power switching speed; `null` for unlimited power.
    pub v_switch_mps: Option<f64>,
    pub v_min_mps: f64,
    pub overspeed_factor: f64,
    pub psi_half_width_deg: f64,
}

impl Default for PredictionSpec {
    fn default() -> Self {
        PredictionSpec {
            t_f_s: 2.4,
            fan_segments: 3,
            a_max_mps2: 10.0,
            v_switch_mps: None,
            v_min_mps: 0.0,
            overspeed_factor: 1.1,
            psi_half_width_deg: 22.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub duration_s: f64,
    pub dt_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    pub map: MapSpec,
    #[serde(default)]
    pub static_obstacles: Vec<StaticObstacleSpec>,
    #[serde(default)]
    pub dynamic_obstacles: Vec<DynamicObstacleSpec>,
    pub ego: EgoSpec,
    #[serde(default)]
    pub sensor: SensorSpec,
    #[serde(default)]
    pub planner: PlannerSpec,
    #[serde(default)]
    pub prediction: PredictionSpec,
    pub sim: SimSpec,
}

/// Motion of a scripted obstacle, resolved against the map.
#[derive(Clone, Debug)]
pub enum Motion {
    Trajectory(Vec<TimedPose>),
    LaneFollowing { lane: Lane, s0: f64, v: f64 },
}

#[derive(Clone, Debug)]
pub struct DynamicObstacle {
    pub id: String,
    pub length: f64,
    pub width: f64,
    pub motion: Motion,
}

impl DynamicObstacle {
    /// Pose and speed at time `t`.
    pub fn state_at(&self, t: f64) -> (Pose2, f64) {
        match &self.motion {
            Motion::LaneFollowing { lane, s0, v } => {
                let s = s0 + v * t;
                (Pose2::new(lane.point_at(s), lane.heading_at(s)), *v)
            }
            Motion::Trajectory(states) => {
                let i = states.partition_point(|p| p.t_s <= t);
                if i == 0 {
                    let p = states[0];
                    return (
                        Pose2::new(Point2::new(p.x_m, p.y_m), p.heading_rad),
                        p.v_mps,
                    );
                }
                if i >= states.len() {
                    let p = *states.last().unwrap();
                    return (
                        Pose2::new(Point2::new(p.x_m, p.y_m), p.heading_rad),
                        p.v_mps,
                    );
                }
                let (a, b) = (states[i - 1], states[i]);
                let f = (t - a.t_s) / (b.t_s - a.t_s);
                let dh = crate::geom::normalize_angle(b.heading_rad - a.heading_rad);
                (
                    Pose2::new(
                        Point2::new(a.x_m + f * (b.x_m - a.x_m), a.y_m + f * (b.y_m - a.y_m)),
                        a.heading_rad + f * dh,
                    ),
                    a.v_mps + f * (b.v_mps - a.v_mps),
                )
            }
        }
    }

    pub fn rectangle_at(&self, t: f64) -> Polygon2 {
        Polygon2::oriented_rectangle(self.state_at(t).0, self.length, self.width)
            .expect("validated dimensions")
    }
}

#[derive(Clone, Debug)]
pub struct EgoSetup {
    pub route: Vec<LaneletId>,
    pub path: Lane,
    pub s0: f64,
    pub v0: f64,
    pub shape: EgoShape,
}

/// A fully validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub map: LaneletMap,
    pub static_obstacles: Vec<(String, Polygon2)>,
    pub dynamic_obstacles: Vec<DynamicObstacle>,
    pub ego: EgoSetup,
    pub sensor: SensorConfig,
    pub planner: PlannerConfig,
    pub prediction: PredictionConfig,
    pub duration: f64,
    pub dt: f64,
}

fn schema(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn invariant(id: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invariant {
        id: id.into(),
        message: message.into(),
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error(de)?;
    Scenario::from_file(file)
}

/// Deserializes while tracking a JSON-pointer-like path of the failing field.
fn serde_path_to_error<'de, D>(de: D) -> Result<ScenarioFile, ScenarioError>
where
    D: serde::Deserializer<'de, Error = serde_json::Error>,
{
    ScenarioFile::deserialize(de).map_err(|e| {
        let msg = e.to_string();
        // serde_json reports the field name in the message; keep line/column as the path
        schema(&format!("line {} column {}", e.line(), e.column()), msg)
    })
}

impl Scenario {
    pub fn from_file(f: ScenarioFile) -> Result<Self, ScenarioError> {
        if f.schema_version != SCHEMA_VERSION {
            return Err(schema(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", f.schema_version),
            ));
        }
        let lanelets = f
            .map
            .lanelets
            .iter()
            .map(|l| {
                Lanelet::new(
                    LaneletId(l.id),
                    l.left_bound.clone(),
                    l.right_bound.clone(),
                    l.successors.iter().map(|&s| LaneletId(s)).collect(),
                    l.speed_limit_mps,
                    l.has_priority_over.iter().map(|&s| LaneletId(s)).collect(),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let map = LaneletMap::new(lanelets)?;

        let static_obstacles = f
            .static_obstacles
            .iter()
            .map(|o| {
                Polygon2::new(o.polygon.clone())
                    .map(|p| (o.id.clone(), p))
                    .map_err(|e| invariant(format!("static obstacle {}", o.id), e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;

        if !(f.sim.dt_s > 0.0 && f.sim.duration_s > 0.0) {
            return Err(schema("sim", "duration_s and dt_s must be positive"));
        }
        let dt = f.sim.dt_s;

        let route: Vec<LaneletId> = f.ego.route.iter().map(|&i| LaneletId(i)).collect();
        let path = map
            .lane(&route)
            .map_err(|e| invariant("ego route", format!("not a successor chain: {e}")))?;
        if !(0.0..=path.length()).contains(&f.ego.s0_m) {
            return Err(invariant("ego", "s0_m outside the route"));
        }
        if !(f.ego.v0_mps >= 0.0 && f.ego.length_m > 0.0 && f.ego.width_m > 0.0) {
            return Err(invariant("ego", "need v0_mps >= 0 and positive dimensions"));
        }

        let mut dynamic_obstacles = Vec::new();
        for o in &f.dynamic_obstacles {
            let id = format!("dynamic obstacle {}", o.id);
            if !(o.length_m > 0.0 && o.width_m > 0.0) {
                return Err(invariant(id, "dimensions must be positive"));
            }
            let motion = match &o.motion {
                MotionSpec::Trajectory { states } => {
                    if states.is_empty() || states.windows(2).any(|w| w[1].t_s <= w[0].t_s) {
                        return Err(invariant(
                            id,
                            "trajectory times must be strictly increasing",
                        ));
                    }
                    if states[0].t_s > 0.0 || states.last().unwrap().t_s < f.sim.duration_s {
                        return Err(invariant(
                            id,
                            "trajectory must cover the simulation duration",
                        ));
                    }
                    Motion::Trajectory(states.clone())
                }
                MotionSpec::LaneFollowing { route, s0_m, v_mps } => {
                    let ids: Vec<LaneletId> = route.iter().map(|&i| LaneletId(i)).collect();
                    let lane = map
                        .lane(&ids)
                        .map_err(|e| invariant(id.clone(), format!("route: {e}")))?;
                    if *v_mps < 0.0 {
                        return Err(invariant(id, "speed must be non-negative"));
                    }
                    Motion::LaneFollowing {
                        lane,
                        s0: *s0_m,
                        v: *v_mps,
                    }
                }
            };
            dynamic_obstacles.push(DynamicObstacle {
                id: o.id.clone(),
                length: o.length_m,
                width: o.width_m,
                motion,
            });
        }

        let sensor = SensorConfig {
            range: f.sensor.range_m,
            angular_resolution: f.sensor.angular_resolution_deg.to_radians(),
        };
        sensor
            .validate()
            .map_err(|e| schema("sensor", e.to_string()))?;

        let planner = PlannerConfig {
            v_des: f.planner.v_des_mps,
            a_comf: f.planner.a_comf_mps2,
            a_hard: f.planner.a_hard_mps2,
            a_failsafe: f.planner.a_failsafe_mps2,
            dt,
            forbid_stop_in_conflict: f.planner.forbid_stop_in_conflict_area,
            ..PlannerConfig::default()
        };
        planner
            .validate()
            .map_err(|e| schema("planner", e.to_string()))?;

        let p = &f.prediction;
        let prediction = PredictionConfig {
            t_f: p.t_f_s,
            dt,
            fan: FanParams {
                segments: p.fan_segments,
            },
            dyn_: DynamicsAssumptions {
                a_max: p.a_max_mps2,
                v_abs_max: 0.0,
                v_switch: p.v_switch_mps.unwrap_or(f64::INFINITY),
            },
            prior: HiddenObstaclePrior {
                v_min: p.v_min_mps,
                overspeed_factor: p.overspeed_factor,
                psi_half_width: p.psi_half_width_deg.to_radians(),
            },
        };
        prediction
            .validate()
            .map_err(|e| schema("prediction", e.to_string()))?;
        let needed = dt + planner.v_des.max(f.ego.v0_mps) / planner.a_failsafe;
        if prediction.t_f < needed - 1e-9 {
            return Err(schema(
                "prediction.t_f_s",
                format!("horizon must cover one step plus a full stop ({needed:.3} s)"),
            ));
        }

        Ok(Scenario {
            name: f.name,
            map,
            static_obstacles,
            dynamic_obstacles,
            ego: EgoSetup {
                route,
                path,
                s0: f.ego.s0_m,
                v0: f.ego.v0_mps,
                shape: EgoShape {
                    length: f.ego.length_m,
                    width: f.ego.width_m,
                },
            },
            sensor,
            planner,
            prediction,
            duration: f.sim.duration_s,
            dt,
        })
    }

    /// Same scenario without scripted obstacles.
    pub fn without_dynamic_obstacles(&self) -> Scenario {
        Scenario {
            dynamic_obstacles: Vec::new(),
            ..self.clone()
        }
    }
}
