//! Reachable-set over-approximations for obstacles with interval initial state.

pub mod m1;
pub mod m2;

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::geom::{GeomError, Point2};
use crate::lanelet::MapError;

pub use m1::{
    fan_tip, m1_occupancy, m1_orientation_fan, m1_point_occupancy, m1_position_lift,
    m1_velocity_interval, orbit_cover, velocity_interval_vertices,
};
pub use m2::{m1_m2_intersection, m2_occupancy, xi_front, LaneBounds, LaneCorridors};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OccupancyError {
    #[error("invalid interval: {0}")]
    InvalidInterval(&'static str),
    #[error("invalid angle: {0}")]
    InvalidAngle(&'static str),
    #[error("position segment cannot be projected onto lanelet: {0}")]
    ProjectionFailed(#[from] MapError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

/// Initial state known only as intervals: a position segment, a heading interval,
/// and a speed interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalState {
    pub pos_a: Point2,
    pub pos_b: Point2,
    pub heading_lo: f64,
    pub heading_hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
}

impl IntervalState {
    /// A fully known state.
    pub fn point(pos: Point2, heading: f64, v: f64) -> Self {
        IntervalState {
            pos_a: pos,
            pos_b: pos,
            heading_lo: heading,
            heading_hi: heading,
            v_lo: v,
            v_hi: v,
        }
    }

    pub fn validate(&self) -> Result<(), OccupancyError> {
        let finite = [self.heading_lo, self.heading_hi, self.v_lo, self.v_hi]
            .iter()
            .all(|x| x.is_finite())
            && self.pos_a.is_finite()
            && self.pos_b.is_finite();
        if !finite {
            return Err(OccupancyError::InvalidInterval("non-finite value"));
        }
        if self.v_lo < 0.0 || self.v_lo > self.v_hi {
            return Err(OccupancyError::InvalidInterval("need 0 <= v_lo <= v_hi"));
        }
        if self.heading_lo > self.heading_hi {
            return Err(OccupancyError::InvalidInterval(
                "need heading_lo <= heading_hi",
            ));
        }
        if self.heading_hi - self.heading_lo > FRAC_PI_2 + 1e-12 {
            return Err(OccupancyError::InvalidInterval(
                "heading interval wider than 90°",
            ));
        }
        Ok(())
    }

    pub fn mid_heading(&self) -> f64 {
        0.5 * (self.heading_lo + self.heading_hi)
    }

    pub fn heading_half_width(&self) -> f64 {
        0.5 * (self.heading_hi - self.heading_lo)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsAssumptions {
    /// Bound on the absolute acceleration, m/s².
    pub a_max: f64,
    /// Speed cap for lane-following prediction, m/s.
    pub v_abs_max: f64,
    /// Engine-power switching speed, m/s; `f64::INFINITY` disables the power limit.
    #[serde(with = "infinite_as_null")]
    pub v_switch: f64,
}

impl Default for DynamicsAssumptions {
    fn default() -> Self {
        DynamicsAssumptions {
            a_max: 10.0,
            v_abs_max: 15.4,
            v_switch: f64::INFINITY,
        }
    }
}

impl DynamicsAssumptions {
    pub fn validate(&self) -> Result<(), OccupancyError> {
        if !(self.a_max > 0.0 && self.a_max.is_finite()) {
            return Err(OccupancyError::InvalidInterval("a_max must be positive"));
        }
        if !(self.v_abs_max >= 0.0 && self.v_abs_max.is_finite()) {
            return Err(OccupancyError::InvalidInterval(
                "v_abs_max must be non-negative",
            ));
        }
        if self.v_switch.is_nan() || self.v_switch <= 0.0 {
            return Err(OccupancyError::InvalidInterval("v_switch must be positive"));
        }
        Ok(())
    }
}

/// Number of segments approximating the circular arc of the orientation fan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FanParams {
    pub segments: u32,
}

impl Default for FanParams {
    fn default() -> Self {
        FanParams { segments: 3 }
    }
}

impl FanParams {
    /// Angular step of the arc approximation.
    pub fn theta(&self, psi_max: f64) -> f64 {
        psi_max / self.segments.max(1) as f64
    }

    /// Absolute tangent grid used for world-frame covers: a 45° half-width split
    /// into `segments` steps.
    pub fn grid_step(&self) -> f64 {
        std::f64::consts::FRAC_PI_4 / self.segments.max(1) as f64
    }
}

pub(crate) mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
