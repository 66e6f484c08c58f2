//! Inductive fail-safe planning along a fixed path: an IDM reference for the next
//! step, a braking tail to standstill, verification against predicted
//! occupancies, and fallback to the previously verified tail.

use serde::{Deserialize, Serialize};

use crate::geom::{clip_convex, convex_hull, Point2, Polygon2, Pose2};
use crate::lanelet::Lane;
use crate::prediction::OccupancyTimeline;

/// Outward buffer on the ego sweep covering mid-step path curvature.
pub const SWEEP_BUFFER: f64 = 0.05;
/// Tolerance when matching the current state against the inherited trajectory.
const INDUCTION_TOL: f64 = 1e-6;
/// Speeds below this after a braking step count as standstill.
const STOP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("trajectory covers {have:.3} s from t={t0:.3}, timeline needs {need:.3} s from t={timeline_t0:.3}")]
    HorizonMismatch {
        t0: f64,
        have: f64,
        timeline_t0: f64,
        need: f64,
    },
    #[error(
        "state (t={t:.3}, s={s:.6}, v={v:.6}) does not continue the previous fail-safe trajectory"
    )]
    InductionBroken { t: f64, s: f64, v: f64 },
    #[error("invalid planner config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    pub time_headway: f64,
    pub min_gap: f64,
    pub exponent: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            time_headway: 1.5,
            min_gap: 2.0,
            exponent: 4.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub v_des: f64,
    pub a_comf: f64,
    pub a_hard: f64,
    pub a_failsafe: f64,
    pub dt: f64,
    pub idm: IdmParams,
    /// Step by which a rejected acceleration is lowered.
    pub decrement: f64,
    /// Reject candidates whose standstill footprint overlaps a conflict area.
    pub forbid_stop_in_conflict: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            v_des: 9.0,
            a_comf: 2.0,
            a_hard: 8.0,
            a_failsafe: 4.0,
            dt: 0.1,
            idm: IdmParams::default(),
            decrement: 0.5,
            forbid_stop_in_conflict: false,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.a_comf > 0.0 && self.a_comf <= self.a_hard) {
            return Err(PlanError::InvalidConfig("need 0 < a_comf <= a_hard"));
        }
        if !(self.a_failsafe > 0.0 && self.a_failsafe <= self.a_hard) {
            return Err(PlanError::InvalidConfig("need 0 < a_failsafe <= a_hard"));
        }
        if !(self.dt > 0.0 && self.v_des > 0.0 && self.decrement > 0.0) {
            return Err(PlanError::InvalidConfig(
                "dt, v_des and decrement must be positive",
            ));
        }
        Ok(())
    }
}

/// Ego footprint, reference point at the rectangle center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoShape {
    pub length: f64,
    pub width: f64,
}

impl Default for EgoShape {
    fn default() -> Self {
        EgoShape {
            length: 4.5,
            width: 1.8,
        }
    }
}

impl EgoShape {
    pub fn rectangle(&self, pose: Pose2) -> Polygon2 {
        Polygon2::oriented_rectangle(pose, self.length, self.width)
            .expect("ego dimensions are validated at load")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub pose: Pose2,
    pub v: f64,
    pub a: f64,
}

/// A trajectory sample: time, arc length along the path, and the state. `a` is the
/// acceleration applied from this sample to the next.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub t: f64,
    pub s: f64,
    pub ego: EgoState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<TrajectoryState>,
    /// States up to this index form the intended part; the rest is the fail-safe part.
    pub split_index: usize,
}

impl Trajectory {
    pub fn t0(&self) -> f64 {
        self.states.first().map_or(0.0, |s| s.t)
    }

    pub fn duration(&self) -> f64 {
        match (self.states.first(), self.states.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn ends_at_rest(&self) -> bool {
        self.states.last().is_some_and(|s| s.ego.v == 0.0)
    }
}

/// Next `(s, v)` after applying `a` for `dt`; braking stops exactly at standstill.
pub fn advance(s: f64, v: f64, a: f64, dt: f64) -> (f64, f64) {
    if a >= 0.0 || v + a * dt > STOP_EPS {
        (s + v * dt + 0.5 * a * dt * dt, (v + a * dt).max(0.0))
    } else {
        (s + v * v / (-2.0 * a), 0.0)
    }
}

fn state_on(path: &Lane, t: f64, s: f64, v: f64, a: f64) -> TrajectoryState {
    TrajectoryState {
        t,
        s,
        ego: EgoState {
            pose: Pose2::new(path.point_at(s), path.heading_at(s)),
            v,
            a,
        },
    }
}

/// IDM acceleration, clipped to `[-a_hard, a_comf]`. `leader` is `(gap, speed)`.
pub fn idm_reference(ego: &EgoState, leader: Option<(f64, f64)>, cfg: &PlannerConfig) -> f64 {
    let v = ego.v.max(0.0);
    let p = &cfg.idm;
    let mut a = 1.0 - (v / cfg.v_des).powf(p.exponent);
    if let Some((gap, v_lead)) = leader {
        let b = cfg.a_comf;
        let s_star = p.min_gap
            + (v * p.time_headway + v * (v - v_lead) / (2.0 * (cfg.a_comf * b).sqrt())).max(0.0);
        a -= (s_star / gap.max(1e-3)).powi(2);
    }
    (cfg.a_comf * a).clamp(-cfg.a_hard, cfg.a_comf)
}

/// Constant braking at `decel` from `from` until standstill, then standing still
/// until `until`. The returned states follow `from` (which is not repeated).
pub fn failsafe_extension(
    from: &TrajectoryState,
    decel: f64,
    dt: f64,
    until: f64,
    path: &Lane,
) -> Vec<TrajectoryState> {
    let mut out = Vec::new();
    let (mut t, mut s, mut v) = (from.t, from.s, from.ego.v);
    while t < until - 1e-9 {
        let a = if v > 0.0 { -decel } else { 0.0 };
        let (s1, v1) = advance(s, v, a, dt);
        t += dt;
        s = s1;
        v = v1;
        let next_a = if v > 0.0 { -decel } else { 0.0 };
        out.push(state_on(path, t, s, v, next_a));
    }
    out
}

/// Braking tail from `from` with the acceleration of `from` set to `-decel`.
fn braking_trajectory(
    from: &TrajectoryState,
    decel: f64,
    dt: f64,
    until: f64,
    path: &Lane,
) -> Trajectory {
    let mut first = *from;
    first.ego.a = if from.ego.v > 0.0 { -decel } else { 0.0 };
    let mut states = vec![first];
    states.extend(failsafe_extension(&first, decel, dt, until, path));
    Trajectory {
        dt,
        states,
        split_index: 0,
    }
}

/// One timestamped pose of an externally supplied trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
}

/// Linearly interpolates `samples` onto `t0 + k·dt` for `k = 0..=steps`. The
/// arc-length field is the cumulative distance between grid points.
pub fn resample(
    samples: &[TrajectorySample],
    t0: f64,
    dt: f64,
    steps: usize,
) -> Result<Trajectory, PlanError> {
    let t_end = t0 + steps as f64 * dt;
    let mismatch = PlanError::HorizonMismatch {
        t0: samples.first().map_or(0.0, |s| s.t),
        have: match (samples.first(), samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        },
        timeline_t0: t0,
        need: steps as f64 * dt,
    };
    let ordered = samples.windows(2).all(|w| w[1].t > w[0].t);
    let (Some(first), Some(last)) = (samples.first(), samples.last()) else {
        return Err(mismatch);
    };
    if !ordered || first.t > t0 + 1e-9 || last.t < t_end - 1e-9 {
        return Err(mismatch);
    }
    let mut states: Vec<TrajectoryState> = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = t0 + k as f64 * dt;
        let i = samples
            .partition_point(|p| p.t <= t)
            .clamp(1, samples.len() - 1);
        let (a, b) = (samples[i - 1], samples[i]);
        let f = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        let dh = crate::geom::normalize_angle(b.heading - a.heading);
        let pose = Pose2::new(
            Point2::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)),
            a.heading + f * dh,
        );
        let v = a.v + f * (b.v - a.v);
        let s = states
            .last()
            .map_or(0.0, |p| p.s + p.ego.pose.position.distance(pose.position));
        if let Some(prev) = states.last_mut() {
            prev.ego.a = (v - prev.ego.v) / dt;
        }
        states.push(TrajectoryState {
            t,
            s,
            ego: EgoState { pose, v, a: 0.0 },
        });
    }
    Ok(Trajectory {
        dt,
        states,
        split_index: 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Safe,
    Unsafe {
        source: String,
        step: usize,
        t_start: f64,
        t_end: f64,
    },
}

impl Verdict {
    pub fn is_safe(&self) -> bool {
        matches!(self, Verdict::Safe)
    }
}

/// Ego sweep over one step: hull of the footprints at both ends, buffered.
pub fn swept_footprint(a: Pose2, b: Pose2, shape: &EgoShape) -> Polygon2 {
    let mut pts: Vec<Point2> = shape.rectangle(a).into_vertices();
    pts.extend(shape.rectangle(b).into_vertices());
    convex_hull(&pts)
        .expect("rectangles have positive area")
        .buffered(SWEEP_BUFFER)
}

/// Checks the trajectory against every occupancy of every step.
pub fn verify(
    traj: &Trajectory,
    timeline: &OccupancyTimeline,
    shape: &EgoShape,
) -> Result<Verdict, PlanError> {
    let n = timeline.steps.len();
    let covers = traj.states.len() > n
        && (traj.t0() - timeline.t0).abs() < 1e-6
        && (traj.dt - timeline.dt).abs() < 1e-9;
    if !covers {
        return Err(PlanError::HorizonMismatch {
            t0: traj.t0(),
            have: traj.duration(),
            timeline_t0: timeline.t0,
            need: timeline.horizon(),
        });
    }
    for (k, step) in timeline.steps.iter().enumerate() {
        let swept = swept_footprint(traj.states[k].ego.pose, traj.states[k + 1].ego.pose, shape);
        let bb = swept.aabb();
        for (source, poly) in step.polygons() {
            if !bb.overlaps(&poly.aabb(), 0.0) {
                continue;
            }
            let hit = if poly.is_convex() {
                clip_convex(poly, &swept).is_some()
            } else {
                crate::geom::polygons_overlap(poly, &swept)
            };
            if hit {
                return Ok(Verdict::Unsafe {
                    source: source.to_string(),
                    step: k,
                    t_start: step.t_start,
                    t_end: step.t_end,
                });
            }
        }
    }
    Ok(Verdict::Safe)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanKind {
    /// A new candidate verified; `accel` is its first-step acceleration.
    Intended { accel: f64, attempts: usize },
    /// No candidate verified; the previous fail-safe tail is followed.
    Fallback,
    /// Neither a candidate nor the inherited tail verified: full braking.
    Emergency,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub trajectory: Trajectory,
    pub kind: PlanKind,
    /// Verdict of the returned trajectory against the current timeline.
    pub verdict: Verdict,
}

pub struct PlanInput<'a> {
    /// Current state; its pose must lie on `path` at arc length `s`.
    pub current: TrajectoryState,
    pub path: &'a Lane,
    pub timeline: &'a OccupancyTimeline,
    pub previous: Option<&'a Trajectory>,
    pub leader: Option<(f64, f64)>,
    /// Areas where the ego may not come to rest when
    /// [`PlannerConfig::forbid_stop_in_conflict`] is set.
    pub conflict_areas: &'a [Polygon2],
}

fn candidate_accels(a0: f64, cfg: &PlannerConfig) -> Vec<f64> {
    let mut out = Vec::new();
    let mut a = a0;
    while a > -cfg.a_failsafe + 1e-9 {
        out.push(a);
        a -= cfg.decrement;
    }
    out.push(-cfg.a_failsafe);
    out
}

/// One planning cycle. Returns a verified trajectory whenever one exists, otherwise
/// the inherited fail-safe tail, and full braking if even that is no longer safe.
pub fn plan_step(
    input: &PlanInput<'_>,
    cfg: &PlannerConfig,
    shape: &EgoShape,
) -> Result<PlanOutcome, PlanError> {
    cfg.validate()?;
    let cur = input.current;
    let until = input.timeline.t0 + input.timeline.horizon();
    let inherited = match input.previous {
        Some(prev) => Some(inherited_tail(prev, &cur, until, input.path)?),
        None => None,
    };

    let a0 = idm_reference(&cur.ego, input.leader, cfg);
    let stop_allowed = |traj: &Trajectory| {
        if !cfg.forbid_stop_in_conflict {
            return true;
        }
        let rest = shape.rectangle(traj.states.last().unwrap().ego.pose);
        !input
            .conflict_areas
            .iter()
            .any(|c| crate::geom::polygons_overlap(c, &rest))
    };
    for (attempt, a) in candidate_accels(a0, cfg).into_iter().enumerate() {
        let (s1, v1) = advance(cur.s, cur.ego.v, a, cfg.dt);
        let mut first = cur;
        first.ego.a = a;
        let second = state_on(input.path, cur.t + cfg.dt, s1, v1, 0.0);
        let mut states = vec![first];
        let tail = braking_trajectory(&second, cfg.a_failsafe, cfg.dt, until, input.path);
        states.extend(tail.states);
        let traj = Trajectory {
            dt: cfg.dt,
            states,
            split_index: 1,
        };
        if !traj.ends_at_rest() || !stop_allowed(&traj) {
            continue;
        }
        if verify(&traj, input.timeline, shape)?.is_safe() {
            return Ok(PlanOutcome {
                trajectory: traj,
                kind: PlanKind::Intended {
                    accel: a,
                    attempts: attempt + 1,
                },
                verdict: Verdict::Safe,
            });
        }
    }

    if let Some(tail) = inherited {
        let verdict = verify(&tail, input.timeline, shape)?;
        if verdict.is_safe() {
            return Ok(PlanOutcome {
                trajectory: tail,
                kind: PlanKind::Fallback,
                verdict,
            });
        }
    }
    let traj = braking_trajectory(&cur, cfg.a_hard, cfg.dt, until, input.path);
    let verdict = verify(&traj, input.timeline, shape)?;
    Ok(PlanOutcome {
        trajectory: traj,
        kind: PlanKind::Emergency,
        verdict,
    })
}

/// The previous trajectory from the current state on, padded with standstill to
/// `until`.
fn inherited_tail(
    prev: &Trajectory,
    cur: &TrajectoryState,
    until: f64,
    path: &Lane,
) -> Result<Trajectory, PlanError> {
    let broken = PlanError::InductionBroken {
        t: cur.t,
        s: cur.s,
        v: cur.ego.v,
    };
    let next = prev.states.get(1).ok_or(broken.clone())?;
    let matches = (next.t - cur.t).abs() < INDUCTION_TOL
        && (next.s - cur.s).abs() < INDUCTION_TOL
        && (next.ego.v - cur.ego.v).abs() < INDUCTION_TOL;
    if !matches {
        return Err(broken);
    }
    let mut states: Vec<TrajectoryState> = prev.states[1..].to_vec();
    let last = *states.last().unwrap();
    if last.ego.v > 0.0 {
        return Err(broken);
    }
    let mut t = last.t;
    while t < until - 1e-9 {
        t += prev.dt;
        states.push(state_on(path, t, last.s, 0.0, 0.0));
    }
    Ok(Trajectory {
        dt: prev.dt,
        states,
        split_index: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lanelet::tests::straight;
    use crate::lanelet::{LaneletId, LaneletMap};
    use crate::prediction::{PredictionConfig, SourceOccupancy};

    fn path() -> (LaneletMap, Lane) {
        let map = LaneletMap::new(vec![straight(1, 0.0, 200.0, 4.0, &[])]).unwrap();
        let lane = map.lane(&[LaneletId(1)]).unwrap();
        (map, lane)
    }

    #[test]
    fn idm_free_road() {
        let cfg = PlannerConfig::default();
        let st = |v| EgoState {
            pose: Pose2::identity(),
            v,
            a: 0.0,
        };
        assert!((idm_reference(&st(0.0), None, &cfg) - 2.0).abs() < 1e-12);
        assert!(idm_reference(&st(9.0), None, &cfg).abs() < 1e-12);
        assert!(idm_reference(&st(9.0), Some((2.0, 0.0)), &cfg) <= -cfg.a_comf);
    }

    #[test]
    fn failsafe_stops_at_expected_point() {
        let (_, lane) = path();
        let start = state_on(&lane, 0.0, 10.0, 9.0, 0.0);
        let tail = failsafe_extension(&start, 4.0, 0.1, 3.0, &lane);
        let stop = tail.iter().find(|s| s.ego.v == 0.0).unwrap();
        assert!((stop.s - 10.0 - 10.125).abs() < 1e-9);
        assert!((stop.t - 2.3).abs() < 1e-9);
        let still = failsafe_extension(&state_on(&lane, 0.0, 5.0, 0.0, 0.0), 4.0, 0.1, 1.0, &lane);
        assert!(still.iter().all(|s| s.s == 5.0 && s.ego.v == 0.0));
        let slow = failsafe_extension(&state_on(&lane, 0.0, 0.0, 2.4, 0.0), 4.0, 0.1, 1.0, &lane);
        let stop = slow.iter().find(|s| s.ego.v == 0.0).unwrap();
        assert!((stop.s - 0.72).abs() < 1e-9);
    }

    #[test]
    fn verify_empty_and_blocked() {
        let (_, lane) = path();
        let cfg = PredictionConfig::default();
        let mut tl = OccupancyTimeline::empty(0.0, &cfg);
        let still = braking_trajectory(&state_on(&lane, 0.0, 20.0, 0.0, 0.0), 4.0, 0.1, 2.4, &lane);
        assert_eq!(
            verify(&still, &tl, &EgoShape::default()).unwrap(),
            Verdict::Safe
        );
        tl.steps[0].occupancies.push(SourceOccupancy {
            source: "x".into(),
            polygons: vec![Polygon2::rectangle(19.0, -1.0, 21.0, 1.0).unwrap()],
        });
        assert!(matches!(
            verify(&still, &tl, &EgoShape::default()).unwrap(),
            Verdict::Unsafe { step: 0, .. }
        ));
        let short = Trajectory {
            dt: 0.1,
            states: still.states[..5].to_vec(),
            split_index: 0,
        };
        assert!(matches!(
            verify(&short, &tl, &EgoShape::default()),
            Err(PlanError::HorizonMismatch { .. })
        ));
    }

    #[test]
    fn empty_road_takes_idm() {
        let (_, lane) = path();
        let tl = OccupancyTimeline::empty(0.0, &PredictionConfig::default());
        let input = PlanInput {
            current: state_on(&lane, 0.0, 10.0, 5.0, 0.0),
            path: &lane,
            timeline: &tl,
            previous: None,
            leader: None,
            conflict_areas: &[],
        };
        let out = plan_step(&input, &PlannerConfig::default(), &EgoShape::default()).unwrap();
        assert!(matches!(out.kind, PlanKind::Intended { attempts: 1, .. }));
        assert!(out.trajectory.ends_at_rest());
    }

    #[test]
    fn mismatched_previous_is_reported() {
        let (_, lane) = path();
        let tl = OccupancyTimeline::empty(0.1, &PredictionConfig::default());
        let prev = braking_trajectory(&state_on(&lane, 0.0, 10.0, 5.0, 0.0), 4.0, 0.1, 2.4, &lane);
        let input = PlanInput {
            current: state_on(&lane, 0.1, 30.0, 5.0, 0.0),
            path: &lane,
            timeline: &tl,
            previous: Some(&prev),
            leader: None,
            conflict_areas: &[],
        };
        assert!(matches!(
            plan_step(&input, &PlannerConfig::default(), &EgoShape::default()),
            Err(PlanError::InductionBroken { .. })
        ));
    }
}
