//! Occupancy prediction over the planning horizon for every hazard source:
//! virtual obstacles behind relevant critical edges, visible obstacles, and
//! static obstacles.

use serde::{Deserialize, Serialize};

use std::f64::consts::FRAC_PI_4;

use crate::geom::{convex_pieces, normalize_angle, Polygon2, Pose2};
use crate::lanelet::LaneletMap;
use crate::occupancy::m2::clip_to_corridors;
use crate::occupancy::{
    m1_occupancy, DynamicsAssumptions, FanParams, IntervalState, LaneCorridors, OccupancyError,
};
use crate::sensing::{edge_to_interval_state, CriticalEdge};

/// Outward buffer applied to every emitted polygon.
pub const EMIT_BUFFER: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictionError {
    #[error("invalid prediction config: {0}")]
    InvalidConfig(&'static str),
    #[error("source {source_id}: {err}")]
    Source {
        source_id: String,
        err: OccupancyError,
    },
}

/// Assumed initial state of an obstacle hidden behind a critical edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenObstaclePrior {
    pub v_min: f64,
    /// Multiplier on the host lanelet's speed limit giving the top speed.
    pub overspeed_factor: f64,
    /// Half-width of the heading interval around the lane direction, radians.
    pub psi_half_width: f64,
}

impl Default for HiddenObstaclePrior {
    fn default() -> Self {
        HiddenObstaclePrior {
            v_min: 0.0,
            overspeed_factor: 1.1,
            psi_half_width: 22.5f64.to_radians(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionConfig {
    /// Horizon, seconds.
    pub t_f: f64,
    /// Step, seconds.
    pub dt: f64,
    pub fan: FanParams,
    /// Acceleration and engine limits; the speed cap is set per source.
    pub dyn_: DynamicsAssumptions,
    pub prior: HiddenObstaclePrior,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        PredictionConfig {
            t_f: 2.4,
            dt: 0.1,
            fan: FanParams::default(),
            dyn_: DynamicsAssumptions::default(),
            prior: HiddenObstaclePrior::default(),
        }
    }
}

impl PredictionConfig {
    pub fn validate(&self) -> Result<(), PredictionError> {
        if !(self.dt > 0.0 && self.dt <= self.t_f && self.t_f.is_finite()) {
            return Err(PredictionError::InvalidConfig("need 0 < dt <= t_f"));
        }
        let steps = self.t_f / self.dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(PredictionError::InvalidConfig(
                "t_f must be a multiple of dt",
            ));
        }
        if self.prior.v_min < 0.0 || self.prior.overspeed_factor < 1.0 {
            return Err(PredictionError::InvalidConfig(
                "need v_min >= 0 and overspeed_factor >= 1",
            ));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_4).contains(&self.prior.psi_half_width) {
            return Err(PredictionError::InvalidConfig(
                "psi_half_width must be in [0, 45°]",
            ));
        }
        self.dyn_
            .validate()
            .map_err(|_| PredictionError::InvalidConfig("invalid dynamics assumptions"))?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_f / self.dt).round() as usize
    }
}

/// A measured obstacle with rectangular body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibleObstacle {
    pub id: String,
    pub pose: Pose2,
    pub v: f64,
    pub length: f64,
    pub width: f64,
}

impl VisibleObstacle {
    pub fn rectangle(&self) -> Polygon2 {
        Polygon2::oriented_rectangle(self.pose, self.length, self.width)
            .expect("obstacle dimensions are validated at load")
    }

    pub fn circumradius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceOccupancy {
    pub source: String,
    pub polygons: Vec<Polygon2>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineStep {
    pub k: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// One entry per hazard source, in source order.
    pub occupancies: Vec<SourceOccupancy>,
}

impl TimelineStep {
    pub fn polygons(&self) -> impl Iterator<Item = (&str, &Polygon2)> {
        self.occupancies
            .iter()
            .flat_map(|o| o.polygons.iter().map(move |p| (o.source.as_str(), p)))
    }
}

/// Per-step occupancies over `[t0, t0 + t_f]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyTimeline {
    pub t0: f64,
    pub dt: f64,
    pub steps: Vec<TimelineStep>,
}

impl OccupancyTimeline {
    pub fn empty(t0: f64, config: &PredictionConfig) -> Self {
        let steps = (0..config.steps())
            .map(|k| TimelineStep {
                k,
                t_start: t0 + k as f64 * config.dt,
                t_end: t0 + (k + 1) as f64 * config.dt,
                occupancies: Vec::new(),
            })
            .collect();
        OccupancyTimeline {
            t0,
            dt: config.dt,
            steps,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.steps.len() as f64 * self.dt
    }

    pub fn sources(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.steps {
            for o in &s.occupancies {
                if !out.contains(&o.source) {
                    out.push(o.source.clone());
                }
            }
        }
        out
    }

    fn push(&mut self, source: &str, per_step: Vec<Vec<Polygon2>>) {
        for (step, polygons) in self.steps.iter_mut().zip(per_step) {
            step.occupancies.push(SourceOccupancy {
                source: source.to_string(),
                polygons,
            });
        }
    }
}

fn emit(polys: Vec<Polygon2>) -> Vec<Polygon2> {
    polys.into_iter().map(|p| p.buffered(EMIT_BUFFER)).collect()
}

/// Per-step occupancy of one interval-state source: M1 grown by `m1_buffer` and
/// `body`, clipped to the lane corridors of every host lanelet (lengthened by
/// `body`), or plain M1 off the map.
fn predict_source(
    state: &IntervalState,
    hosts: &[crate::lanelet::LaneletId],
    m1_buffer: f64,
    body: f64,
    map: &LaneletMap,
    dyn_: &DynamicsAssumptions,
    config: &PredictionConfig,
) -> Result<Vec<Vec<Polygon2>>, OccupancyError> {
    let corridors = hosts
        .iter()
        .map(|&h| Ok(LaneCorridors::new(state, h, map, dyn_, config.t_f)?.with_margin(body)))
        .collect::<Result<Vec<_>, OccupancyError>>()?;
    let grow = m1_buffer + body;
    let mut out = Vec::with_capacity(config.steps());
    for k in 0..config.steps() {
        let (t_k, t_k1) = (k as f64 * config.dt, (k + 1) as f64 * config.dt);
        let mut m1 = m1_occupancy(state, dyn_, config.fan, t_k, t_k1)?;
        if grow > 0.0 {
            m1 = m1.buffered(grow);
        }
        let polys = if corridors.is_empty() {
            vec![m1]
        } else {
            let mut v = Vec::new();
            for c in &corridors {
                v.extend(clip_to_corridors(&m1, &c.pieces(t_k1)?));
            }
            v
        };
        out.push(emit(polys));
    }
    Ok(out)
}

/// Source id of a critical edge.
pub fn edge_source_id(index: usize, edge: &CriticalEdge) -> String {
    format!("edge:{index}@{}", edge.lanelet_id)
}

/// Predicts occupancies for every relevant edge, visible obstacle and static
/// obstacle. Sources appear in that order; edges keep their input index.
pub fn predict_all(
    t0: f64,
    edges: &[CriticalEdge],
    visible: &[VisibleObstacle],
    static_obstacles: &[(String, Polygon2)],
    map: &LaneletMap,
    config: &PredictionConfig,
) -> Result<OccupancyTimeline, PredictionError> {
    config.validate()?;
    let mut timeline = OccupancyTimeline::empty(t0, config);

    for (i, edge) in edges.iter().enumerate().filter(|(_, e)| e.relevant) {
        let source_id = edge_source_id(i, edge);
        let state = edge_to_interval_state(edge, map, &config.prior);
        let dyn_ = DynamicsAssumptions {
            v_abs_max: state.v_hi,
            ..config.dyn_
        };
        let per_step = predict_source(
            &state,
            &[edge.lanelet_id],
            edge.deviation,
            0.0,
            map,
            &dyn_,
            config,
        )
        .map_err(|err| PredictionError::Source {
            source_id: source_id.clone(),
            err,
        })?;
        timeline.push(&source_id, per_step);
    }

    for obs in visible {
        let source_id = format!("obstacle:{}", obs.id);
        let state = IntervalState::point(obs.pose.position, obs.pose.heading, obs.v.max(0.0));
        // host lanelets are those the obstacle could be following in their direction
        let hosts: Vec<_> = map
            .lanelets_at(obs.pose.position, 0.0)
            .into_iter()
            .filter(|&h| {
                map.get(h).is_ok_and(|l| {
                    let (s, _, _) = l.project(obs.pose.position);
                    normalize_angle(obs.pose.heading - l.heading_at(s)).abs() <= FRAC_PI_4
                })
            })
            .collect();
        let limit = hosts
            .iter()
            .filter_map(|&h| map.get(h).ok())
            .map(|l| l.speed_limit * config.prior.overspeed_factor)
            .fold(0.0, f64::max);
        let dyn_ = DynamicsAssumptions {
            v_abs_max: limit.max(state.v_hi),
            ..config.dyn_
        };
        let per_step = predict_source(&state, &hosts, 0.0, obs.circumradius(), map, &dyn_, config)
            .map_err(|err| PredictionError::Source {
                source_id: source_id.clone(),
                err,
            })?;
        timeline.push(&source_id, per_step);
    }

    for (id, poly) in static_obstacles {
        let pieces = emit(convex_pieces(poly));
        timeline.push(&format!("static:{id}"), vec![pieces; config.steps()]);
    }
    Ok(timeline)
}
