//! Acceleration-based occupancy: Kamm's circle swept over a speed interval, a
//! heading interval, and a position segment.

use crate::geom::{convex_hull, Point2, Polygon2, Pose2};

use super::{DynamicsAssumptions, FanParams, IntervalState, OccupancyError};

/// Center of the Kamm circle along the local x axis.
#[inline]
pub fn kamm_center(v: f64, t: f64) -> f64 {
    v * t
}

#[inline]
pub fn kamm_radius(a_max: f64, t: f64) -> f64 {
    0.5 * a_max * t * t
}

/// Upper envelope point of the Kamm circles for initial speed `v`, defined while
/// the obstacle can still not have stopped (`t <= v / a_max`).
pub fn kamm_envelope(v: f64, a_max: f64, t: f64) -> Option<Point2> {
    if v <= 0.0 || a_max * t > v {
        return None;
    }
    let x = v * t - a_max * a_max * t.powi(3) / (2.0 * v);
    let y = kamm_radius(a_max, t) * (1.0 - (a_max * t / v).powi(2)).sqrt();
    Some(Point2::new(x, y))
}

/// The six construction points `q1..q6` of the speed-interval polygon, in the
/// local frame (initial heading along +x). `q1..q3` are the upper points, ordered
/// rear to front; `q4..q6` mirror them from front to rear.
pub fn velocity_interval_vertices(
    v_lo: f64,
    v_hi: f64,
    a_max: f64,
    t_k: f64,
    t_k1: f64,
) -> Result<[Point2; 6], OccupancyError> {
    if !(v_lo >= 0.0 && v_lo <= v_hi && v_hi.is_finite()) {
        return Err(OccupancyError::InvalidInterval("need 0 <= v_lo <= v_hi"));
    }
    if !(t_k >= 0.0 && t_k < t_k1 && t_k1.is_finite()) {
        return Err(OccupancyError::InvalidInterval("need 0 <= t_k < t_k1"));
    }
    if !(a_max > 0.0 && a_max.is_finite()) {
        return Err(OccupancyError::InvalidInterval("a_max must be positive"));
    }
    let r0 = kamm_radius(a_max, t_k);
    let r1 = kamm_radius(a_max, t_k1);
    let rear0 = kamm_center(v_lo, t_k) - r0;
    let rear1 = kamm_center(v_lo, t_k1) - r1;
    let q1 = Point2::new(rear0, r0);
    let q2x = match kamm_envelope(v_lo, a_max, t_k1) {
        Some(b) => b.x,
        None => rear0.min(rear1),
    };
    let q2 = Point2::new(q2x, r1);
    let q3 = Point2::new(kamm_center(v_hi, t_k1) + r1, r1);
    let mirror = |p: Point2| Point2::new(p.x, -p.y);
    Ok([q1, q2, q3, mirror(q3), mirror(q2), mirror(q1)])
}

/// Local-frame occupancy over `[t_k, t_k1]` for speeds in `[v_lo, v_hi]` and an
/// exact initial heading along +x.
pub fn m1_velocity_interval(
    v_lo: f64,
    v_hi: f64,
    a_max: f64,
    t_k: f64,
    t_k1: f64,
) -> Result<Polygon2, OccupancyError> {
    let q = velocity_interval_vertices(v_lo, v_hi, a_max, t_k, t_k1)?;
    Ok(convex_hull(&q)?)
}

/// Outer tip of the arc approximation: `front / cos(θ/2)` on the x axis, where
/// `front` is the farthest longitudinal reach.
pub fn fan_tip(front: f64, psi_max: f64, fan: FanParams) -> Point2 {
    Point2::new(front / (0.5 * fan.theta(psi_max)).cos(), 0.0)
}

/// Covers every rotation of `hexagon` by an angle in `[-psi_max, psi_max]`.
///
/// The outline follows the rotated rear points, the arc of `fan.segments`
/// segments around the front reach, and for every vertex the polygon
/// circumscribing its own orbit, so the result stays a superset even where the
/// front corners lie outside the arc radius.
pub fn m1_orientation_fan(
    hexagon: &Polygon2,
    psi_max: f64,
    fan: FanParams,
    front: f64,
) -> Result<Polygon2, OccupancyError> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&psi_max) {
        return Err(OccupancyError::InvalidAngle("psi_max must be in [0, π/2]"));
    }
    if fan.segments == 0 {
        return Err(OccupancyError::InvalidAngle(
            "fan needs at least one segment",
        ));
    }
    if psi_max == 0.0 {
        return Ok(hexagon.clone());
    }
    let n = fan.segments as i32;
    let theta = fan.theta(psi_max);
    let stretch = 1.0 / (0.5 * theta).cos();
    let w0 = fan_tip(front, psi_max, fan);

    let mut pts: Vec<Point2> = (-n..=n).map(|j| w0.rotate(j as f64 * theta)).collect();
    for &q in hexagon.vertices() {
        for j in 0..=2 * n {
            let a = -psi_max + j as f64 * theta;
            pts.push(q.rotate(a));
            if j < 2 * n {
                pts.push(q.rotate(a + 0.5 * theta) * stretch);
            }
        }
    }
    Ok(convex_hull(&pts)?)
}

/// Covers every rotation of `points` by an absolute angle in `[lo, hi]`.
///
/// Each orbit arc is circumscribed by its tangents at `lo`, `hi` and every
/// multiple of `step` in between. A narrower interval only adds tangents within
/// its range, so the cover is monotone in the interval.
pub fn orbit_cover(
    points: &[Point2],
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<Polygon2, OccupancyError> {
    if !(lo <= hi && step > 0.0) {
        return Err(OccupancyError::InvalidAngle(
            "need lo <= hi and a positive step",
        ));
    }
    let mut tangents = vec![lo];
    let mut k = (lo / step).floor() + 1.0;
    while k * step < hi {
        tangents.push(k * step);
        k += 1.0;
    }
    if hi > lo {
        tangents.push(hi);
    }
    let mut pts = Vec::with_capacity(points.len() * 2 * tangents.len());
    for &q in points {
        for w in tangents.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            pts.push(q.rotate(w[0]));
            pts.push(q.rotate(w[0] + half) * (1.0 / half.cos()));
        }
        pts.push(q.rotate(hi));
    }
    Ok(convex_hull(&pts)?)
}

/// Convex hull of `fan` translated to `pos_a` and to `pos_b`.
pub fn m1_position_lift(fan: &Polygon2, pos_a: Point2, pos_b: Point2) -> Polygon2 {
    if pos_a.distance(pos_b) <= crate::geom::EPS {
        return fan.translate(pos_a);
    }
    let pts: Vec<Point2> = fan
        .vertices()
        .iter()
        .flat_map(|&v| [v + pos_a, v + pos_b])
        .collect();
    // the fan has positive area, so the hull cannot degenerate
    convex_hull(&pts).unwrap_or_else(|_| fan.translate(pos_a))
}

/// World-frame occupancy over `[t_k, t_k1]` of an obstacle whose initial state lies
/// in `state`, under the bounded-acceleration, no-reversing model.
pub fn m1_occupancy(
    state: &IntervalState,
    dyn_: &DynamicsAssumptions,
    fan: FanParams,
    t_k: f64,
    t_k1: f64,
) -> Result<Polygon2, OccupancyError> {
    state.validate()?;
    if fan.segments == 0 {
        return Err(OccupancyError::InvalidAngle(
            "fan needs at least one segment",
        ));
    }
    let hexagon = m1_velocity_interval(state.v_lo, state.v_hi, dyn_.a_max, t_k, t_k1)?;
    let cover = orbit_cover(
        hexagon.vertices(),
        state.heading_lo,
        state.heading_hi,
        fan.grid_step(),
    )?;
    Ok(m1_position_lift(&cover, state.pos_a, state.pos_b))
}

/// Occupancy of an obstacle with exactly known position, heading and speed.
pub fn m1_point_occupancy(
    pos: Point2,
    heading: f64,
    v: f64,
    a_max: f64,
    t_k: f64,
    t_k1: f64,
) -> Result<Polygon2, OccupancyError> {
    if !(v >= 0.0 && t_k >= 0.0 && t_k < t_k1 && a_max > 0.0) {
        return Err(OccupancyError::InvalidInterval("invalid point state"));
    }
    let (r0, r1) = (0.5 * a_max * t_k * t_k, 0.5 * a_max * t_k1 * t_k1);
    let rear = v * t_k - r0;
    let side = if v > 0.0 && a_max * t_k1 <= v {
        v * t_k1 - a_max * a_max * t_k1.powi(3) / (2.0 * v)
    } else {
        rear.min(v * t_k1 - r1)
    };
    let front = v * t_k1 + r1;
    let pts = [
        Point2::new(rear, -r0),
        Point2::new(side, -r1),
        Point2::new(front, -r1),
        Point2::new(front, r1),
        Point2::new(side, r1),
        Point2::new(rear, r0),
    ];
    Ok(convex_hull(&pts)?.transform(&Pose2::new(pos, heading)))
}
