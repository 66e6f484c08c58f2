//! Brute-force reachability sampler used to falsify occupancy predictions.
//!
//! Each sample draws an initial state from an [`IntervalState`] and drives a
//! unicycle with piecewise-constant accelerations inside Kamm's circle, integrated
//! with RK4 at 1 ms. Speed never goes negative. Sample `i` is seeded with
//! `splitmix64(seed ^ (i * 0x9E3779B97F4A7C15))`, so samples are independent of
//! the order in which they are drawn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::Point2;
use crate::lanelet::Lane;
use crate::occupancy::{DynamicsAssumptions, IntervalState};

pub const INTEGRATION_STEP: f64 = 1e-3;
/// Below this speed the heading rate is computed as if moving at this speed, which
/// only shrinks the realized lateral acceleration.
const MIN_TURN_SPEED: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleConfig {
    pub n_samples: usize,
    /// Controls are redrawn at this period, seconds.
    pub control_switch_dt: f64,
    pub seed: u64,
    pub lane_following: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            n_samples: 10_000,
            control_switch_dt: 0.1,
            seed: 0,
            lane_following: false,
        }
    }
}

/// splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// One sampled trajectory evaluated on the requested time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTrace {
    pub positions: Vec<Point2>,
    pub speeds: Vec<f64>,
}

/// Draws from `[lo, hi]`, hitting either end with probability 1/4 each.
fn draw_interval(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    match rng.random_range(0..4u8) {
        0 => lo,
        1 => hi,
        _ if hi > lo => rng.random_range(lo..=hi),
        _ => lo,
    }
}

/// An acceleration in Kamm's circle; half of the draws lie on its boundary.
fn draw_control(rng: &mut ChaCha8Rng, a_max: f64) -> (f64, f64) {
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let mag = if rng.random_bool(0.5) {
        a_max
    } else {
        a_max * rng.random_range(0.0f64..=1.0).sqrt()
    };
    (mag * angle.cos(), mag * angle.sin())
}

/// Longitudinal acceleration only, half at the limits.
fn draw_longitudinal(rng: &mut ChaCha8Rng, a_max: f64) -> f64 {
    match rng.random_range(0..4u8) {
        0 => a_max,
        1 => -a_max,
        _ => rng.random_range(-a_max..=a_max),
    }
}

#[derive(Clone, Copy)]
struct Unicycle {
    x: f64,
    y: f64,
    psi: f64,
    v: f64,
}

impl Unicycle {
    fn deriv(&self, a_long: f64, a_lat: f64) -> [f64; 4] {
        let v = self.v.max(0.0);
        let dv = if v <= 0.0 && a_long < 0.0 {
            0.0
        } else {
            a_long
        };
        [
            v * self.psi.cos(),
            v * self.psi.sin(),
            a_lat / v.max(MIN_TURN_SPEED),
            dv,
        ]
    }

    fn offset(&self, d: [f64; 4], h: f64) -> Unicycle {
        Unicycle {
            x: self.x + h * d[0],
            y: self.y + h * d[1],
            psi: self.psi + h * d[2],
            v: self.v + h * d[3],
        }
    }

    fn rk4(&self, a_long: f64, a_lat: f64, h: f64) -> Unicycle {
        let k1 = self.deriv(a_long, a_lat);
        let k2 = self.offset(k1, 0.5 * h).deriv(a_long, a_lat);
        let k3 = self.offset(k2, 0.5 * h).deriv(a_long, a_lat);
        let k4 = self.offset(k3, h).deriv(a_long, a_lat);
        let d: [f64; 4] =
            std::array::from_fn(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0);
        let mut next = self.offset(d, h);
        next.v = next.v.max(0.0);
        next
    }
}

/// Free-space sample: unicycle driven inside Kamm's circle.
fn sample_free(
    state: &IntervalState,
    dyn_: &DynamicsAssumptions,
    times: &[f64],
    cfg: &SampleConfig,
    index: usize,
) -> SampleTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(cfg.seed, index));
    let f = draw_interval(&mut rng, 0.0, 1.0);
    let p = state.pos_a.lerp(state.pos_b, f);
    let mut s = Unicycle {
        x: p.x,
        y: p.y,
        psi: draw_interval(&mut rng, state.heading_lo, state.heading_hi),
        v: draw_interval(&mut rng, state.v_lo, state.v_hi),
    };
    let mut trace = SampleTrace {
        positions: Vec::with_capacity(times.len()),
        speeds: Vec::with_capacity(times.len()),
    };
    let mut t = 0.0;
    let mut next_switch = 0.0;
    let mut control = (0.0, 0.0);
    for &target in times {
        while t < target - 1e-12 {
            if t >= next_switch - 1e-12 {
                control = draw_control(&mut rng, dyn_.a_max);
                next_switch += cfg.control_switch_dt;
            }
            let h = INTEGRATION_STEP
                .min(target - t)
                .min(next_switch - t)
                .max(1e-12);
            s = s.rk4(control.0, control.1, h);
            t += h;
        }
        trace.positions.push(Point2::new(s.x, s.y));
        trace.speeds.push(s.v);
    }
    trace
}

/// Lane-following sample: constant lateral offset, heading along the lane,
/// longitudinal acceleration only, speed capped at `dyn_.v_abs_max`.
fn sample_lane(
    state: &IntervalState,
    lane: &Lane,
    dyn_: &DynamicsAssumptions,
    times: &[f64],
    cfg: &SampleConfig,
    index: usize,
) -> SampleTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(cfg.seed, index));
    let f = draw_interval(&mut rng, 0.0, 1.0);
    let (mut s, d, _) = lane.project(state.pos_a.lerp(state.pos_b, f));
    let mut v = draw_interval(&mut rng, state.v_lo, state.v_hi.min(dyn_.v_abs_max));
    let mut trace = SampleTrace {
        positions: Vec::with_capacity(times.len()),
        speeds: Vec::with_capacity(times.len()),
    };
    let (mut t, mut next_switch, mut a) = (0.0, 0.0, 0.0);
    for &target in times {
        while t < target - 1e-12 {
            if t >= next_switch - 1e-12 {
                a = draw_longitudinal(&mut rng, dyn_.a_max);
                next_switch += cfg.control_switch_dt;
            }
            let h = INTEGRATION_STEP
                .min(target - t)
                .min(next_switch - t)
                .max(1e-12);
            let acc = |v: f64| {
                if (v <= 0.0 && a < 0.0) || (v >= dyn_.v_abs_max && a > 0.0) {
                    0.0
                } else if a > 0.0 && v > dyn_.v_switch {
                    a.min(dyn_.a_max * dyn_.v_switch / v)
                } else {
                    a
                }
            };
            let k1 = (v, acc(v));
            let k2 = (v + 0.5 * h * k1.1, acc(v + 0.5 * h * k1.1));
            let k3 = (v + 0.5 * h * k2.1, acc(v + 0.5 * h * k2.1));
            let k4 = (v + h * k3.1, acc(v + h * k3.1));
            s += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0).max(0.0);
            v = (v + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1))
                .clamp(0.0, dyn_.v_abs_max.max(state.v_hi));
            t += h;
        }
        trace
            .positions
            .push(lane.to_cartesian(s.min(lane.length()), d));
        trace.speeds.push(v);
    }
    trace
}

/// Samples `cfg.n_samples` admissible trajectories from `interval` and reports
/// their positions at each time in `times` (seconds, ascending, starting at or
/// after 0). `lane` is required when `cfg.lane_following` is set.
pub fn sample_states(
    interval: &IntervalState,
    dyn_: &DynamicsAssumptions,
    times: &[f64],
    cfg: &SampleConfig,
    lane: Option<&Lane>,
) -> Vec<SampleTrace> {
    (0..cfg.n_samples)
        .map(|i| match (cfg.lane_following, lane) {
            (true, Some(l)) => sample_lane(interval, l, dyn_, times, cfg, i),
            _ => sample_free(interval, dyn_, times, cfg, i),
        })
        .collect()
}
