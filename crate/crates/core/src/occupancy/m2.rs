//! Lane-following occupancy: longitudinal reach along every successor chain of the
//! host lanelet, under a speed cap and an engine-power limit.

use serde::{Deserialize, Serialize};

use crate::geom::{clip_convex, Polygon2};
use crate::lanelet::{Lane, LaneletId, LaneletMap};

use super::{m1_occupancy, DynamicsAssumptions, FanParams, IntervalState, OccupancyError};

const RK4_STEP: f64 = 1e-3;
/// Added to numerically integrated distances so they stay upper bounds.
const RK4_MARGIN: f64 = 1e-6;

/// Maximal acceleration at speed `v`: full below the switching speed, power-limited
/// above it, and zero at the speed cap.
fn max_acceleration(v: f64, dyn_: &DynamicsAssumptions) -> f64 {
    if v >= dyn_.v_abs_max {
        0.0
    } else if v < dyn_.v_switch {
        dyn_.a_max
    } else {
        dyn_.a_max * dyn_.v_switch / v
    }
}

/// Farthest distance travelled within `t` from initial speed `v0`.
pub fn xi_front(v0: f64, dyn_: &DynamicsAssumptions, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let v_max = dyn_.v_abs_max;
    if v0 >= v_max {
        return v0 * t;
    }
    if dyn_.v_switch.is_infinite() || dyn_.v_switch >= v_max {
        let t_sw = (v_max - v0) / dyn_.a_max;
        return if t <= t_sw {
            v0 * t + 0.5 * dyn_.a_max * t * t
        } else {
            v0 * t_sw + 0.5 * dyn_.a_max * t_sw * t_sw + v_max * (t - t_sw)
        };
    }

    let f = |v: f64| max_acceleration(v.min(v_max), dyn_);
    let (mut x, mut v, mut elapsed) = (0.0, v0, 0.0);
    while elapsed < t {
        let h = RK4_STEP.min(t - elapsed);
        let k1v = f(v);
        let k2v = f(v + 0.5 * h * k1v);
        let k3v = f(v + 0.5 * h * k2v);
        let k4v = f(v + h * k3v);
        let (k1x, k2x, k3x, k4x) = (v, v + 0.5 * h * k1v, v + 0.5 * h * k2v, v + h * k3v);
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v = (v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)).min(v_max);
        elapsed += h;
    }
    x + RK4_MARGIN
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneBounds {
    pub lane: Vec<LaneletId>,
    pub xi_rear: f64,
    pub xi_front: f64,
}

/// Successor chains of a host lanelet prepared for repeated corridor queries.
#[derive(Clone, Debug)]
pub struct LaneCorridors {
    lanes: Vec<Lane>,
    s_lo: f64,
    s_hi: f64,
    v_hi: f64,
    dyn_: DynamicsAssumptions,
    margin: f64,
}

impl LaneCorridors {
    /// Projects the position segment of `state` onto `host` and enumerates the
    /// successor chains reachable within `horizon`.
    pub fn new(
        state: &IntervalState,
        host: LaneletId,
        map: &LaneletMap,
        dyn_: &DynamicsAssumptions,
        horizon: f64,
    ) -> Result<Self, OccupancyError> {
        let a = map.project_to_lanelet(host, state.pos_a)?;
        let b = map.project_to_lanelet(host, state.pos_b)?;
        let (s_lo, s_hi) = if a.s <= b.s { (a.s, b.s) } else { (b.s, a.s) };
        let reach = s_hi + xi_front(state.v_hi, dyn_, horizon);
        let lanes = map
            .successor_chains(host, reach)?
            .iter()
            .map(|c| map.lane(c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LaneCorridors {
            lanes,
            s_lo,
            s_hi,
            v_hi: state.v_hi,
            dyn_: *dyn_,
            margin: 0.0,
        })
    }

    /// Extends every corridor by `margin` at both ends, for occupancies of a body
    /// around the reference point.
    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin.max(0.0);
        self
    }

    pub fn bounds(&self, t_k1: f64) -> Vec<LaneBounds> {
        let front = self.s_hi + xi_front(self.v_hi, &self.dyn_, t_k1);
        self.lanes
            .iter()
            .map(|l| LaneBounds {
                lane: l.ids().to_vec(),
                xi_rear: (self.s_lo - self.margin).max(0.0),
                xi_front: (front + self.margin).min(l.length()),
            })
            .collect()
    }

    /// One corridor polygon per chain for the time interval ending at `t_k1`.
    pub fn polygons(&self, t_k1: f64) -> Result<Vec<Polygon2>, OccupancyError> {
        self.lanes
            .iter()
            .zip(self.bounds(t_k1))
            .map(|(l, b)| Ok(l.corridor(b.xi_rear, b.xi_front)?))
            .collect()
    }

    /// Convex pieces of every corridor, grouped per chain.
    pub fn pieces(&self, t_k1: f64) -> Result<Vec<Vec<Polygon2>>, OccupancyError> {
        self.lanes
            .iter()
            .zip(self.bounds(t_k1))
            .map(|(l, b)| Ok(l.corridor_pieces(b.xi_rear, b.xi_front)?))
            .collect()
    }
}

/// Lane corridors reachable over `[t_k, t_k1]`, one per successor chain.
pub fn m2_occupancy(
    state: &IntervalState,
    host: LaneletId,
    map: &LaneletMap,
    dyn_: &DynamicsAssumptions,
    _t_k: f64,
    t_k1: f64,
) -> Result<Vec<Polygon2>, OccupancyError> {
    LaneCorridors::new(state, host, map, dyn_, t_k1)?.polygons(t_k1)
}

/// M1 clipped to the lane corridors, as convex pieces.
pub fn m1_m2_intersection(
    state: &IntervalState,
    host: LaneletId,
    map: &LaneletMap,
    dyn_: &DynamicsAssumptions,
    fan: FanParams,
    t_k: f64,
    t_k1: f64,
) -> Result<Vec<Polygon2>, OccupancyError> {
    let m1 = m1_occupancy(state, dyn_, fan, t_k, t_k1)?;
    let corridors = LaneCorridors::new(state, host, map, dyn_, t_k1)?;
    Ok(clip_to_corridors(&m1, &corridors.pieces(t_k1)?))
}

/// Clips a convex polygon against corridor pieces.
pub(crate) fn clip_to_corridors(m1: &Polygon2, pieces: &[Vec<Polygon2>]) -> Vec<Polygon2> {
    let mut out = Vec::new();
    for chain in pieces {
        for piece in chain {
            if let Some(p) = clip_convex(m1, piece) {
                out.push(p);
            }
        }
    }
    out
}
