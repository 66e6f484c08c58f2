//! Field of view, its border segments on lanelets, and critical-edge
//! classification.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::geom::{
    point_segment_distance, segment_inside_intervals, Point2, Polygon2, Pose2, Segment2,
};
use crate::lanelet::{Lane, LanePosition, LaneletId, LaneletMap};
use crate::occupancy::IntervalState;
use crate::prediction::HiddenObstaclePrior;

/// Angular offset of the extra rays cast beside each occluder vertex.
const SWEEP_EPS: f64 = 1e-7;
/// Border runs shorter than this are dropped.
pub const MIN_SEGMENT_LENGTH: f64 = 0.05;
/// Border runs are split into chords that stay this close to the border.
pub const MAX_CHORD_DEVIATION: f64 = 0.1;
/// Distance of the rule-4 probe point ahead of the segment midpoint.
pub const DIRECTION_PROBE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SensingError {
    #[error("ego position lies inside occluder {0}")]
    EgoInsideObstacle(usize),
    #[error("invalid sensor configuration: {0}")]
    InvalidSensor(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    /// Meters, measured from the vehicle center.
    pub range: f64,
    /// Radians per polygon edge of the range circle.
    pub angular_resolution: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            range: 50.0,
            angular_resolution: PI / 180.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), SensingError> {
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(SensingError::InvalidSensor("range must be positive"));
        }
        if !(self.angular_resolution > 0.0 && self.angular_resolution <= 2f64.to_radians() + 1e-12)
        {
            return Err(SensingError::InvalidSensor(
                "angular resolution must be in (0, 2°]",
            ));
        }
        Ok(())
    }
}

/// Visibility polygon, star-shaped around `origin`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldOfView {
    pub origin: Point2,
    pub range: f64,
    pub polygon: Polygon2,
}

impl FieldOfView {
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        p.distance(self.origin) <= self.range + tol && self.polygon.contains_point(p, tol)
    }
}

/// Distance from the center to the inscribed range polygon along `angle`.
fn range_polygon_distance(angle: f64, range: f64, step: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    let mid = ((a / step).floor() + 0.5) * step;
    range * (0.5 * step).cos() / (a - mid).cos()
}

fn ray_hit(origin: Point2, dir: Point2, p: Point2, q: Point2) -> Option<f64> {
    let e = q - p;
    let denom = dir.cross(e);
    if denom.abs() < 1e-18 {
        return None;
    }
    let w = p - origin;
    let t = w.cross(e) / denom;
    let u = w.cross(dir) / denom;
    (t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u)).then_some(t)
}

/// Parameters in `[0, 1]` where segment `p`–`q` meets the circle.
fn circle_crossings(c: Point2, r: f64, p: Point2, q: Point2) -> Vec<f64> {
    let d = q - p;
    let f = p - c;
    let a = d.dot(d);
    let b = 2.0 * f.dot(d);
    let cc = f.dot(f) - r * r;
    let disc = b * b - 4.0 * a * cc;
    if a == 0.0 || disc < 0.0 {
        return Vec::new();
    }
    let s = disc.sqrt();
    [(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)]
        .into_iter()
        .filter(|t| (0.0..=1.0).contains(t))
        .collect()
}

/// Visibility polygon of a 360° range sensor at `ego.position` with shadows cast by
/// `occluders`. The range circle is polygonized as an inscribed polygon.
pub fn compute_fov(
    ego: Pose2,
    sensor: &SensorConfig,
    occluders: &[Polygon2],
) -> Result<FieldOfView, SensingError> {
    sensor.validate()?;
    let o = ego.position;
    let range = sensor.range;
    for (i, occ) in occluders.iter().enumerate() {
        let inside = occ.contains_point(o, 0.0) && occ.boundary_distance(o) > 1e-9;
        if inside {
            return Err(SensingError::EgoInsideObstacle(i));
        }
    }
    let m = (TAU / sensor.angular_resolution - 1e-9).ceil() as usize;
    let step = TAU / m as f64;

    let mut edges: Vec<(Point2, Point2)> = Vec::new();
    let mut angles: Vec<f64> = (0..m).map(|k| k as f64 * step).collect();
    for occ in occluders {
        let bb = occ.aabb();
        if bb.max.x < o.x - range
            || bb.min.x > o.x + range
            || bb.max.y < o.y - range
            || bb.min.y > o.y + range
        {
            continue;
        }
        for (p, q) in occ.edges() {
            if point_segment_distance(o, p, q) > range {
                continue;
            }
            edges.push((p, q));
            let mut critical: Vec<Point2> = circle_crossings(o, range, p, q)
                .into_iter()
                .map(|t| p.lerp(q, t))
                .collect();
            if p.distance(o) <= range {
                critical.push(p);
            }
            for c in critical {
                let a = (c - o).angle();
                angles.extend([a - SWEEP_EPS, a, a + SWEEP_EPS]);
            }
        }
    }
    let mut angles: Vec<f64> = angles.into_iter().map(|a| a.rem_euclid(TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let ring: Vec<Point2> = angles
        .iter()
        .map(|&a| {
            let dir = Point2::from_angle(a);
            let mut t = range_polygon_distance(a, range, step);
            for &(p, q) in &edges {
                if let Some(h) = ray_hit(o, dir, p, q) {
                    t = t.min(h);
                }
            }
            o + dir * t
        })
        .collect();
    let polygon = Polygon2::from_ring_unchecked(ring).ok_or(SensingError::EgoInsideObstacle(0))?;
    Ok(FieldOfView {
        origin: o,
        range,
        polygon,
    })
}

/// A chord of a FOV border run lying on one lanelet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BorderSegment {
    pub segment: Segment2,
    pub lanelet_id: LaneletId,
    /// Largest distance from the chord to the border portion it stands for.
    pub deviation: f64,
}

/// Splits a polyline into chords whose deviation from the polyline stays within
/// [`MAX_CHORD_DEVIATION`]. Returns `(start, end, deviation)`.
fn split_into_chords(run: &[Point2]) -> Vec<(Point2, Point2, f64)> {
    let dev = |a: usize, b: usize| -> f64 {
        run[a + 1..b]
            .iter()
            .map(|&p| point_segment_distance(p, run[a], run[b]))
            .fold(0.0, f64::max)
    };
    let mut out = Vec::new();
    let mut a = 0;
    while a + 1 < run.len() {
        let mut b = a + 1;
        while b + 1 < run.len() && dev(a, b + 1) <= MAX_CHORD_DEVIATION {
            b += 1;
        }
        out.push((run[a], run[b], dev(a, b)));
        a = b;
    }
    out
}

/// Maximal runs of the FOV border inside each lanelet surface, as chords.
pub fn extract_border_segments(fov: &FieldOfView, map: &LaneletMap) -> Vec<BorderSegment> {
    let ring = fov.polygon.vertices();
    let n = ring.len();
    let fov_bb = fov.polygon.aabb();
    let mut out = Vec::new();
    for lanelet in map.lanelets() {
        let poly = lanelet.polygon();
        if !poly.aabb().overlaps(&fov_bb, 1e-9) {
            continue;
        }
        // runs as polylines; `open` means the last run reaches the current vertex
        let mut runs: Vec<Vec<Point2>> = Vec::new();
        let mut open = false;
        let mut first_starts_at_ring_start = false;
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            let ivs = segment_inside_intervals(a, b, poly);
            let mut reach_end = false;
            for (k, &(t0, t1)) in ivs.iter().enumerate() {
                let continues = k == 0 && open && t0 <= 1e-12;
                let end = a.lerp(b, t1);
                if continues {
                    runs.last_mut().unwrap().push(end);
                } else {
                    if i == 0 && t0 <= 1e-12 {
                        first_starts_at_ring_start = true;
                    }
                    runs.push(vec![a.lerp(b, t0), end]);
                }
                reach_end = t1 >= 1.0 - 1e-12;
            }
            open = reach_end;
        }
        if open && first_starts_at_ring_start && runs.len() > 1 {
            let first = runs.remove(0);
            runs.last_mut().unwrap().extend(first.into_iter().skip(1));
        }
        for run in runs {
            for (a, b, deviation) in split_into_chords(&run) {
                if a.distance(b) < MIN_SEGMENT_LENGTH {
                    continue;
                }
                if let Ok(segment) = Segment2::new(a, b) {
                    out.push(BorderSegment {
                        segment,
                        lanelet_id: lanelet.id,
                        deviation,
                    });
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    None,
    NoPathToEgo,
    NoRightOfWay,
    BehindEgo,
    LeadsOutsideFov,
    NotForemost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalEdge {
    pub segment: Segment2,
    pub lanelet_id: LaneletId,
    /// Lanelet heading at the segment midpoint, radians.
    pub travel_direction: f64,
    pub relevant: bool,
    pub rejection_reason: RejectionReason,
    /// Chord deviation from the border it stands for (see [`BorderSegment`]).
    pub deviation: f64,
}

/// First lanelet on a successor path from `host` that is on the route or crosses
/// it, with the path's arc length up to that lanelet's start and its predecessor on
/// the path.
fn first_conflict(
    map: &LaneletMap,
    host: LaneletId,
    route: &[LaneletId],
) -> Option<(LaneletId, Option<LaneletId>, f64)> {
    let is_conflict =
        |id: LaneletId| route.contains(&id) || route.iter().any(|&r| map.crosses(id, r));
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([(host, None, 0.0, 0usize)]);
    while let Some((id, prev, offset, hops)) = queue.pop_front() {
        if !seen.insert(id) {
            continue;
        }
        if is_conflict(id) {
            return Some((id, prev, offset));
        }
        if hops >= map.hop_limit() {
            continue;
        }
        let l = map.get(id).ok()?;
        for &s in &l.successors {
            queue.push_back((s, Some(id), offset + l.length(), hops + 1));
        }
    }
    None
}

/// Lanelets leading into the first route lanelet through unique predecessors.
fn lanes_behind_route(map: &LaneletMap, route: &[LaneletId]) -> BTreeSet<LaneletId> {
    let mut out = BTreeSet::new();
    let Some(&first) = route.first() else {
        return out;
    };
    let mut cur = first;
    for _ in 0..map.hop_limit() {
        let preds = map.predecessors(cur);
        if preds.len() != 1 || route.contains(&preds[0]) || !out.insert(preds[0]) {
            break;
        }
        cur = preds[0];
    }
    out
}

/// True when every place where `host` traffic can enter or cross the route lies
/// behind `ego_s` (route arc length of the ego rear axle).
fn joins_route_behind(map: &LaneletMap, host: LaneletId, route: &Lane, ego_s: f64) -> bool {
    let mut any = false;
    for id in map.reachable(host) {
        if let Some(o) = route.offset_of(id) {
            any = true;
            if id == host || o > ego_s {
                return false;
            }
        }
        for &r in route.ids() {
            if map.crosses(id, r) {
                any = true;
                let o = route.offset_of(r).unwrap_or(f64::INFINITY);
                let len = map.get(r).map(|l| l.length()).unwrap_or(f64::INFINITY);
                if o + len > ego_s {
                    return false;
                }
            }
        }
    }
    any
}

fn right_of_way_missing(map: &LaneletMap, host: LaneletId, route: &[LaneletId]) -> bool {
    let reach = map.reachable(host);
    if reach.iter().any(|id| route.contains(id)) {
        return false;
    }
    let mut pairs = 0;
    for &l in &reach {
        for &e in route {
            if map.crosses(l, e) {
                pairs += 1;
                if !map.has_priority(e, l) {
                    return false;
                }
            }
        }
    }
    pairs > 0
}

/// Applies the rejection rules in order: no path to the ego route, no right of way,
/// behind the ego vehicle, leading out of the field of view, not the foremost on its
/// approach. `ego_rear` is the ego rear axle on the route.
pub fn classify_edges(
    segments: &[BorderSegment],
    map: &LaneletMap,
    ego_route: &[LaneletId],
    ego_rear: LanePosition,
    fov: &FieldOfView,
) -> Vec<CriticalEdge> {
    if segments.is_empty() {
        return Vec::new();
    }
    let route_lane = map.lane(ego_route).ok();
    let ego_s = route_lane
        .as_ref()
        .and_then(|l| l.offset_of(ego_rear.lanelet_id))
        .map(|o| o + ego_rear.s);
    let behind_lanes = lanes_behind_route(map, ego_route);

    let mut edges = Vec::with_capacity(segments.len());
    let mut foremost: BTreeMap<(LaneletId, LaneletId), (f64, usize)> = BTreeMap::new();
    for seg in segments {
        let host = seg.lanelet_id;
        let Ok(lanelet) = map.get(host) else {
            continue;
        };
        let mid = seg.segment.midpoint();
        let (s_mid, _, _) = lanelet_project(map, host, mid);
        let travel_direction = lanelet.heading_at(s_mid);

        let mut reason = RejectionReason::None;
        if !map.can_reach_or_cross(host, ego_route) {
            reason = RejectionReason::NoPathToEgo;
        } else if right_of_way_missing(map, host, ego_route) {
            reason = RejectionReason::NoRightOfWay;
        } else if behind_lanes.contains(&host) {
            reason = RejectionReason::BehindEgo;
        } else if ego_route.contains(&host) {
            if let (Some(lane), Some(ego_s)) = (&route_lane, ego_s) {
                let s_max = lane
                    .project(seg.segment.a)
                    .0
                    .max(lane.project(seg.segment.b).0);
                if s_max < ego_s {
                    reason = RejectionReason::BehindEgo;
                }
            }
        } else if let (Some(lane), Some(ego_s)) = (&route_lane, ego_s) {
            if joins_route_behind(map, host, lane, ego_s) {
                reason = RejectionReason::BehindEgo;
            }
        }
        if reason == RejectionReason::None {
            let probe = mid + Point2::from_angle(travel_direction) * DIRECTION_PROBE;
            if !fov.contains(probe, 0.0) {
                reason = RejectionReason::LeadsOutsideFov;
            }
        }
        if reason == RejectionReason::None {
            if let Some((conflict, prev, offset)) = first_conflict(map, host, ego_route) {
                let s_max = lanelet_project(map, host, seg.segment.a)
                    .0
                    .max(lanelet_project(map, host, seg.segment.b).0);
                let key = (conflict, prev.unwrap_or(host));
                let dist = offset - s_max;
                let idx = edges.len();
                match foremost.get(&key) {
                    Some(&(d, _)) if d <= dist => reason = RejectionReason::NotForemost,
                    Some(&(_, loser)) => {
                        let e: &mut CriticalEdge = &mut edges[loser];
                        e.relevant = false;
                        e.rejection_reason = RejectionReason::NotForemost;
                        foremost.insert(key, (dist, idx));
                    }
                    None => {
                        foremost.insert(key, (dist, idx));
                    }
                }
            }
        }
        edges.push(CriticalEdge {
            segment: seg.segment,
            lanelet_id: host,
            travel_direction,
            relevant: reason == RejectionReason::None,
            rejection_reason: reason,
            deviation: seg.deviation,
        });
    }
    edges
}

fn lanelet_project(map: &LaneletMap, id: LaneletId, p: Point2) -> (f64, f64, f64) {
    map.get(id)
        .map(|l| l.project(p))
        .unwrap_or((0.0, 0.0, f64::INFINITY))
}

/// Interval state of the virtual obstacle hidden behind a relevant edge.
pub fn edge_to_interval_state(
    edge: &CriticalEdge,
    map: &LaneletMap,
    prior: &HiddenObstaclePrior,
) -> IntervalState {
    let v_max = map
        .get(edge.lanelet_id)
        .map(|l| prior.overspeed_factor * l.speed_limit)
        .unwrap_or(0.0);
    IntervalState {
        pos_a: edge.segment.a,
        pos_b: edge.segment.b,
        heading_lo: edge.travel_direction - prior.psi_half_width,
        heading_hi: edge.travel_direction + prior.psi_half_width,
        v_lo: prior.v_min.min(v_max),
        v_hi: v_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lanelet::tests::straight;

    #[test]
    fn empty_scene_area() {
        let fov = compute_fov(Pose2::identity(), &SensorConfig::default(), &[]).unwrap();
        let disc = PI * 50.0 * 50.0;
        let a = fov.polygon.area();
        assert!(a >= 0.999 * disc && a <= disc, "{a} vs {disc}");
        assert!(fov
            .polygon
            .vertices()
            .iter()
            .all(|v| v.norm() <= 50.0 + 1e-6));
    }

    #[test]
    fn far_occluder_has_no_effect() {
        let occ = Polygon2::rectangle(100.0, 100.0, 110.0, 105.0).unwrap();
        let a = compute_fov(Pose2::identity(), &SensorConfig::default(), &[]).unwrap();
        let b = compute_fov(Pose2::identity(), &SensorConfig::default(), &[occ]).unwrap();
        assert_eq!(a.polygon, b.polygon);
    }

    #[test]
    fn ego_inside_occluder_rejected() {
        let occ = Polygon2::rectangle(-1.0, -1.0, 1.0, 1.0).unwrap();
        assert_eq!(
            compute_fov(Pose2::identity(), &SensorConfig::default(), &[occ]).unwrap_err(),
            SensingError::EgoInsideObstacle(0)
        );
    }

    #[test]
    fn wall_casts_shadow() {
        let wall = Polygon2::rectangle(10.0, -5.0, 11.0, 5.0).unwrap();
        let fov = compute_fov(Pose2::identity(), &SensorConfig::default(), &[wall]).unwrap();
        assert!(fov.contains(Point2::new(9.0, 0.0), 0.0));
        assert!(!fov.contains(Point2::new(20.0, 0.0), 0.0));
        assert!(fov.contains(Point2::new(20.0, 15.0), 0.0));
        assert!(fov.contains(Point2::new(10.0, 0.0), 1e-6));
    }

    #[test]
    fn straight_lane_through_circle_gives_two_chords() {
        let map = LaneletMap::new(vec![straight(1, -80.0, 80.0, 4.0, &[])]).unwrap();
        let fov = compute_fov(Pose2::identity(), &SensorConfig::default(), &[]).unwrap();
        let segs = extract_border_segments(&fov, &map);
        assert_eq!(segs.len(), 2, "{segs:?}");
        for s in &segs {
            assert!((s.segment.length() - 4.0).abs() < 0.05);
            assert!(s.deviation < 0.1);
        }
    }

    #[test]
    fn lane_inside_fov_has_no_border() {
        let map = LaneletMap::new(vec![straight(1, -20.0, 20.0, 4.0, &[])]).unwrap();
        let fov = compute_fov(Pose2::identity(), &SensorConfig::default(), &[]).unwrap();
        assert!(extract_border_segments(&fov, &map).is_empty());
    }

    #[test]
    fn behind_ego_on_ego_lane() {
        let map = LaneletMap::new(vec![straight(1, -80.0, 80.0, 4.0, &[])]).unwrap();
        let fov = compute_fov(Pose2::identity(), &SensorConfig::default(), &[]).unwrap();
        let seg = BorderSegment {
            segment: Segment2::new(Point2::new(-10.0, -2.0), Point2::new(-10.0, 2.0)).unwrap(),
            lanelet_id: LaneletId(1),
            deviation: 0.0,
        };
        let ego = LanePosition {
            lanelet_id: LaneletId(1),
            s: 78.65,
            d: 0.0,
        };
        let edges = classify_edges(&[seg], &map, &[LaneletId(1)], ego, &fov);
        assert_eq!(edges[0].rejection_reason, RejectionReason::BehindEgo);
        assert!(!edges[0].relevant);
        assert!(classify_edges(&[], &map, &[LaneletId(1)], ego, &fov).is_empty());
    }

    #[test]
    fn interval_state_from_prior() {
        let map = LaneletMap::new(vec![lanelet_14()]).unwrap();
        let edge = CriticalEdge {
            segment: Segment2::new(Point2::new(5.0, -2.0), Point2::new(5.0, 2.0)).unwrap(),
            lanelet_id: LaneletId(1),
            travel_direction: 0.0,
            relevant: true,
            rejection_reason: RejectionReason::None,
            deviation: 0.0,
        };
        let prior = HiddenObstaclePrior::default();
        let st = edge_to_interval_state(&edge, &map, &prior);
        assert!((st.v_hi - 15.4).abs() < 1e-12 && st.v_lo == 0.0);
        assert!((st.heading_lo + 22.5f64.to_radians()).abs() < 1e-12);
        assert!((st.heading_hi - 22.5f64.to_radians()).abs() < 1e-12);
        let exact = HiddenObstaclePrior {
            v_min: 14.0,
            overspeed_factor: 1.0,
            ..prior
        };
        let st = edge_to_interval_state(&edge, &map, &exact);
        assert_eq!((st.v_lo, st.v_hi), (14.0, 14.0));
    }

    fn lanelet_14() -> crate::lanelet::Lanelet {
        crate::lanelet::Lanelet::new(
            LaneletId(1),
            vec![Point2::new(0.0, 2.0), Point2::new(20.0, 2.0)],
            vec![Point2::new(0.0, -2.0), Point2::new(20.0, -2.0)],
            vec![],
            14.0,
            vec![],
        )
        .unwrap()
    }
}
