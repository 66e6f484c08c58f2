//! Road model: lanelets, lanes (successor chains), curvilinear coordinates,
//! and the topology queries used by edge classification and lane-following
//! occupancy.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::{convex_pieces, project_onto_segment, Point2, Polygon2};

/// Bounds are resampled at most this far apart before the centerline is built.
pub const RESAMPLE_STEP: f64 = 1.0;
/// Default successor-search depth.
pub const DEFAULT_HOP_LIMIT: usize = 25;
/// Lateral and longitudinal outward buffer applied to corridors.
pub const CORRIDOR_BUFFER: f64 = 1e-3;
/// Surfaces overlapping by less than this are considered touching, not crossing.
const MIN_CROSSING_AREA: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LaneletId(pub u32);

impl fmt::Display for LaneletId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("unknown lanelet {0}")]
    UnknownLanelet(LaneletId),
    #[error("lanelet {from} references missing {kind} lanelet {to}")]
    DanglingReference {
        from: LaneletId,
        to: LaneletId,
        kind: &'static str,
    },
    #[error("invalid lanelet {id}: {reason}")]
    InvalidLanelet { id: LaneletId, reason: String },
    #[error("point ({x:.3}, {y:.3}) is outside lanelet {id}")]
    OutsideLanelet { id: LaneletId, x: f64, y: f64 },
    #[error("range [{from}, {to}] is outside lane of length {length}")]
    RangeOutsideLane { from: f64, to: f64, length: f64 },
    #[error("lane is empty or not a successor chain")]
    InvalidLane,
}

/// Longitudinal/lateral coordinates on a lanelet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanePosition {
    pub lanelet_id: LaneletId,
    /// Arc length along the centerline from the lanelet start.
    pub s: f64,
    /// Signed lateral offset, left positive.
    pub d: f64,
}

/// Polyline with cumulative arc length.
#[derive(Clone, Debug)]
struct Polyline {
    points: Vec<Point2>,
    cum: Vec<f64>,
}

impl Polyline {
    fn new(points: Vec<Point2>) -> Self {
        let mut cum = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                acc += p.distance(points[i - 1]);
            }
            cum.push(acc);
        }
        Polyline { points, cum }
    }

    fn length(&self) -> f64 {
        *self.cum.last().unwrap_or(&0.0)
    }

    /// Index `i` of the segment containing arc length `s` (clamped).
    fn segment_at(&self, s: f64) -> usize {
        let n = self.points.len();
        match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    fn point_at_fraction(&self, f: f64) -> Point2 {
        let s = f * self.length();
        let i = self.segment_at(s);
        let seg = self.cum[i + 1] - self.cum[i];
        let t = if seg > 0.0 {
            (s - self.cum[i]) / seg
        } else {
            0.0
        };
        self.points[i].lerp(self.points[i + 1], t.clamp(0.0, 1.0))
    }

    fn vertex_fractions(&self) -> impl Iterator<Item = f64> + '_ {
        let len = self.length();
        self.cum
            .iter()
            .map(move |c| if len > 0.0 { c / len } else { 0.0 })
    }
}

/// Cross-sections sampled along a lanelet or lane: paired left/right bound points
/// and the centerline through their midpoints.
#[derive(Clone, Debug)]
struct Sections {
    left: Vec<Point2>,
    right: Vec<Point2>,
    center: Polyline,
}

impl Sections {
    fn len(&self) -> f64 {
        self.center.length()
    }

    fn tangent(&self, i: usize) -> Point2 {
        let p = &self.center.points;
        (p[i + 1] - p[i])
            .normalized()
            .unwrap_or(Point2::new(1.0, 0.0))
    }

    /// Interpolated (left, right) at arc length `s`; extrapolated along the end
    /// tangents outside `[0, len]`.
    fn cross_section_at(&self, s: f64) -> (Point2, Point2) {
        let n = self.left.len();
        if s <= 0.0 {
            let t = self.tangent(0) * s;
            return (self.left[0] + t, self.right[0] + t);
        }
        if s >= self.len() {
            let t = self.tangent(n - 2) * (s - self.len());
            return (self.left[n - 1] + t, self.right[n - 1] + t);
        }
        let i = self.center.segment_at(s);
        let seg = self.center.cum[i + 1] - self.center.cum[i];
        let f = if seg > 0.0 {
            (s - self.center.cum[i]) / seg
        } else {
            0.0
        };
        (
            self.left[i].lerp(self.left[i + 1], f),
            self.right[i].lerp(self.right[i + 1], f),
        )
    }

    fn point_at(&self, s: f64) -> Point2 {
        let (l, r) = self.cross_section_at(s);
        l.lerp(r, 0.5)
    }

    fn heading_at(&self, s: f64) -> f64 {
        let i = self.center.segment_at(s.clamp(0.0, self.len()));
        self.tangent(i).angle()
    }

    /// Closest centerline point: `(s, d, distance)`.
    fn project(&self, p: Point2) -> (f64, f64, f64) {
        let pts = &self.center.points;
        let mut best = (0.0, 0.0, f64::INFINITY);
        for i in 0..pts.len() - 1 {
            let (a, b) = (pts[i], pts[i + 1]);
            let t = project_onto_segment(p, a, b);
            let foot = a.lerp(b, t);
            let dist = p.distance(foot);
            if dist < best.2 - 1e-12 {
                let tangent = (b - a).normalized().unwrap_or(Point2::new(1.0, 0.0));
                let d = tangent.cross(p - foot);
                let s = self.center.cum[i] + t * (self.center.cum[i + 1] - self.center.cum[i]);
                best = (s, d, dist);
            }
        }
        best
    }

    fn half_width_at(&self, s: f64) -> f64 {
        let (l, r) = self.cross_section_at(s);
        0.5 * l.distance(r)
    }

    /// Stations for a corridor over `[s_from, s_to]`: both ends plus every
    /// interior sample.
    fn stations(&self, s_from: f64, s_to: f64) -> Vec<f64> {
        let mut st = vec![s_from];
        st.extend(
            self.center
                .cum
                .iter()
                .copied()
                .filter(|&c| c > s_from + 1e-9 && c < s_to - 1e-9),
        );
        st.push(s_to);
        st
    }

    fn widen(l: Point2, r: Point2, buffer: f64) -> (Point2, Point2) {
        let dir = (l - r).normalized().unwrap_or(Point2::new(0.0, 1.0));
        (l + dir * buffer, r - dir * buffer)
    }

    /// Buffered cross-sections at the given stations. Between resampled sections
    /// the buffered sections are interpolated, so a corridor over a sub-range
    /// stays inside the corridor over the full range.
    fn buffered_sections(&self, stations: &[f64], buffer: f64) -> Vec<(Point2, Point2)> {
        let n = self.left.len();
        stations
            .iter()
            .map(|&s| {
                if s <= 0.0 || s >= self.len() {
                    let (l, r) = self.cross_section_at(s);
                    return Self::widen(l, r, buffer);
                }
                let i = self.center.segment_at(s).min(n - 2);
                let seg = self.center.cum[i + 1] - self.center.cum[i];
                let f = if seg > 0.0 {
                    (s - self.center.cum[i]) / seg
                } else {
                    0.0
                };
                let (l0, r0) = Self::widen(self.left[i], self.right[i], buffer);
                let (l1, r1) = Self::widen(self.left[i + 1], self.right[i + 1], buffer);
                (l0.lerp(l1, f), r0.lerp(r1, f))
            })
            .collect()
    }
}

/// Resamples both bounds at common arc-length fractions: every original vertex of
/// either bound plus a uniform grid no coarser than [`RESAMPLE_STEP`].
fn resample_bounds(left: &[Point2], right: &[Point2]) -> Sections {
    let lp = Polyline::new(left.to_vec());
    let rp = Polyline::new(right.to_vec());
    let n = ((lp.length().max(rp.length()) / RESAMPLE_STEP).ceil() as usize).max(1);
    let mut fracs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    fracs.extend(lp.vertex_fractions());
    fracs.extend(rp.vertex_fractions());
    fracs.sort_by(f64::total_cmp);
    fracs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let left: Vec<Point2> = fracs.iter().map(|&f| lp.point_at_fraction(f)).collect();
    let right: Vec<Point2> = fracs.iter().map(|&f| rp.point_at_fraction(f)).collect();
    let center = left
        .iter()
        .zip(&right)
        .map(|(l, r)| l.lerp(*r, 0.5))
        .collect();
    Sections {
        left,
        right,
        center: Polyline::new(center),
    }
}

#[derive(Clone, Debug)]
pub struct Lanelet {
    pub id: LaneletId,
    pub left_bound: Vec<Point2>,
    pub right_bound: Vec<Point2>,
    pub successors: Vec<LaneletId>,
    /// Lanelets whose surface overlaps this one; filled in by [`LaneletMap::new`].
    pub crossing: Vec<LaneletId>,
    /// Meters per second.
    pub speed_limit: f64,
    pub has_priority_over: Vec<LaneletId>,
    sections: Sections,
    polygon: Polygon2,
    pieces: Vec<Polygon2>,
}

impl Lanelet {
    pub fn new(
        id: LaneletId,
        left_bound: Vec<Point2>,
        right_bound: Vec<Point2>,
        successors: Vec<LaneletId>,
        speed_limit: f64,
        has_priority_over: Vec<LaneletId>,
    ) -> Result<Self, MapError> {
        let invalid = |reason: String| MapError::InvalidLanelet { id, reason };
        if left_bound.len() < 2 || right_bound.len() < 2 {
            return Err(invalid("bounds need at least 2 points".into()));
        }
        if !(speed_limit > 0.0 && speed_limit.is_finite()) {
            return Err(invalid(format!(
                "speed limit {speed_limit} must be positive"
            )));
        }
        let mut ring = left_bound.clone();
        ring.extend(right_bound.iter().rev().copied());
        let polygon = Polygon2::new(ring).map_err(|e| invalid(format!("surface: {e}")))?;

        let sections = resample_bounds(&left_bound, &right_bound);
        let mean = 0.5
            * (Polyline::new(left_bound.clone()).length()
                + Polyline::new(right_bound.clone()).length());
        let cl = sections.len();
        if (cl - mean).abs() > 0.05 * mean {
            return Err(invalid(format!(
                "centerline length {cl:.3} deviates from bounds mean {mean:.3}"
            )));
        }
        let pieces = convex_pieces(&polygon);
        Ok(Lanelet {
            id,
            left_bound,
            right_bound,
            successors,
            crossing: Vec::new(),
            speed_limit,
            has_priority_over,
            sections,
            polygon,
            pieces,
        })
    }

    pub fn length(&self) -> f64 {
        self.sections.len()
    }

    pub fn centerline(&self) -> &[Point2] {
        &self.sections.center.points
    }

    /// Surface polygon: left bound followed by the reversed right bound.
    pub fn polygon(&self) -> &Polygon2 {
        &self.polygon
    }

    pub fn point_at(&self, s: f64) -> Point2 {
        self.sections.point_at(s)
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        self.sections.heading_at(s)
    }

    pub fn half_width_at(&self, s: f64) -> f64 {
        self.sections.half_width_at(s)
    }

    /// Cartesian point for curvilinear `(s, d)`.
    pub fn to_cartesian(&self, s: f64, d: f64) -> Point2 {
        let c = self.sections.point_at(s);
        c + Point2::from_angle(self.heading_at(s)).perp() * d
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        self.polygon.contains_point(p, tol)
    }

    /// `(s, d, distance-to-centerline)` of the closest centerline point.
    pub fn project(&self, p: Point2) -> (f64, f64, f64) {
        self.sections.project(p)
    }

    fn overlaps(&self, other: &Lanelet) -> bool {
        if !self.polygon.aabb().overlaps(&other.polygon.aabb(), 0.0) {
            return false;
        }
        let mut area = 0.0;
        for a in &self.pieces {
            for b in &other.pieces {
                if let Some(p) = crate::geom::clip_convex(a, b) {
                    area += p.area();
                }
            }
        }
        area > MIN_CROSSING_AREA
    }
}

/// Immutable road network.
#[derive(Clone, Debug)]
pub struct LaneletMap {
    lanelets: BTreeMap<LaneletId, Lanelet>,
    hop_limit: usize,
}

impl LaneletMap {
    /// Validates references and precomputes the (symmetric) crossing relation.
    pub fn new(lanelets: Vec<Lanelet>) -> Result<Self, MapError> {
        let mut map: BTreeMap<LaneletId, Lanelet> = BTreeMap::new();
        for l in lanelets {
            if map.contains_key(&l.id) {
                return Err(MapError::InvalidLanelet {
                    id: l.id,
                    reason: "duplicate id".into(),
                });
            }
            map.insert(l.id, l);
        }
        for l in map.values() {
            for (kind, refs) in [
                ("successor", &l.successors),
                ("priority", &l.has_priority_over),
            ] {
                if let Some(&to) = refs.iter().find(|r| !map.contains_key(r)) {
                    return Err(MapError::DanglingReference {
                        from: l.id,
                        to,
                        kind,
                    });
                }
            }
        }

        let ids: Vec<LaneletId> = map.keys().copied().collect();
        let mut crossing: BTreeMap<LaneletId, Vec<LaneletId>> = BTreeMap::new();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                let (la, lb) = (&map[&a], &map[&b]);
                if la.successors.contains(&b) || lb.successors.contains(&a) {
                    continue;
                }
                if la.overlaps(lb) {
                    crossing.entry(a).or_default().push(b);
                    crossing.entry(b).or_default().push(a);
                }
            }
        }
        for (id, c) in crossing {
            map.get_mut(&id).unwrap().crossing = c;
        }
        Ok(LaneletMap {
            lanelets: map,
            hop_limit: DEFAULT_HOP_LIMIT,
        })
    }

    pub fn with_hop_limit(mut self, hop_limit: usize) -> Self {
        self.hop_limit = hop_limit;
        self
    }

    pub fn hop_limit(&self) -> usize {
        self.hop_limit
    }

    pub fn get(&self, id: LaneletId) -> Result<&Lanelet, MapError> {
        self.lanelets.get(&id).ok_or(MapError::UnknownLanelet(id))
    }

    pub fn lanelets(&self) -> impl Iterator<Item = &Lanelet> {
        self.lanelets.values()
    }

    pub fn len(&self) -> usize {
        self.lanelets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanelets.is_empty()
    }

    pub fn crosses(&self, a: LaneletId, b: LaneletId) -> bool {
        self.lanelets
            .get(&a)
            .is_some_and(|l| l.crossing.contains(&b))
    }

    pub fn has_priority(&self, a: LaneletId, over: LaneletId) -> bool {
        self.lanelets
            .get(&a)
            .is_some_and(|l| l.has_priority_over.contains(&over))
    }

    pub fn predecessors(&self, id: LaneletId) -> Vec<LaneletId> {
        self.lanelets
            .values()
            .filter(|l| l.successors.contains(&id))
            .map(|l| l.id)
            .collect()
    }

    /// Lanelets whose surface contains `p` within `tol`.
    pub fn lanelets_at(&self, p: Point2, tol: f64) -> Vec<LaneletId> {
        self.lanelets
            .values()
            .filter(|l| l.polygon.aabb().contains(p, tol) && l.contains(p, tol))
            .map(|l| l.id)
            .collect()
    }

    pub fn project_to_lanelet(&self, id: LaneletId, p: Point2) -> Result<LanePosition, MapError> {
        let l = self.get(id)?;
        if !l.contains(p, 0.5) {
            return Err(MapError::OutsideLanelet { id, x: p.x, y: p.y });
        }
        let (s, d, _) = l.sections.project(p);
        Ok(LanePosition {
            lanelet_id: id,
            s,
            d,
        })
    }

    /// Lanelets reachable from `from` (inclusive) through at most `hop_limit` successor hops.
    pub fn reachable(&self, from: LaneletId) -> BTreeSet<LaneletId> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([(from, 0usize)]);
        while let Some((id, hops)) = queue.pop_front() {
            if !seen.insert(id) {
                continue;
            }
            if hops >= self.hop_limit {
                continue;
            }
            if let Some(l) = self.lanelets.get(&id) {
                queue.extend(l.successors.iter().map(|&s| (s, hops + 1)));
            }
        }
        seen
    }

    /// True iff a successor chain from `from` reaches or crosses a lanelet of `route`.
    pub fn can_reach_or_cross(&self, from: LaneletId, route: &[LaneletId]) -> bool {
        self.reachable(from)
            .iter()
            .any(|&id| route.contains(&id) || route.iter().any(|&r| self.crosses(id, r)))
    }

    /// All successor chains starting at `from` that extend at least `reach` meters past
    /// the start of `from` (or end at a lanelet without successors). Chains stop
    /// growing once they cover `reach` or hit the hop limit; cycles are cut.
    pub fn successor_chains(
        &self,
        from: LaneletId,
        reach: f64,
    ) -> Result<Vec<Vec<LaneletId>>, MapError> {
        self.get(from)?;
        let mut out = Vec::new();
        let mut stack = vec![(vec![from], self.get(from)?.length())];
        while let Some((chain, end)) = stack.pop() {
            let last = self.get(*chain.last().unwrap())?;
            let next: Vec<LaneletId> = last
                .successors
                .iter()
                .copied()
                .filter(|s| !chain.contains(s))
                .collect();
            if end >= reach || next.is_empty() || chain.len() > self.hop_limit {
                out.push(chain);
                continue;
            }
            // reversed so chains come out in successor order
            for s in next.into_iter().rev() {
                let mut c = chain.clone();
                c.push(s);
                stack.push((c, end + self.get(s)?.length()));
            }
        }
        Ok(out)
    }

    pub fn lane(&self, ids: &[LaneletId]) -> Result<Lane, MapError> {
        Lane::new(self, ids)
    }

    /// Surface of `lane` between two cross-sections, outward-buffered by
    /// [`CORRIDOR_BUFFER`].
    pub fn corridor_polygon(
        &self,
        lane: &[LaneletId],
        s_from: f64,
        s_to: f64,
    ) -> Result<Polygon2, MapError> {
        self.lane(lane)?.corridor(s_from, s_to)
    }
}

/// A successor chain of lanelets with concatenated curvilinear coordinates.
#[derive(Clone, Debug)]
pub struct Lane {
    ids: Vec<LaneletId>,
    /// Start arc length of each lanelet within the lane.
    offsets: Vec<f64>,
    sections: Sections,
}

impl Lane {
    pub fn new(map: &LaneletMap, ids: &[LaneletId]) -> Result<Self, MapError> {
        if ids.is_empty() {
            return Err(MapError::InvalidLane);
        }
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut offsets = Vec::with_capacity(ids.len());
        for (k, &id) in ids.iter().enumerate() {
            let l = map.get(id)?;
            if k > 0 && !map.get(ids[k - 1])?.successors.contains(&id) {
                return Err(MapError::InvalidLane);
            }
            let mut ls = l.sections.left.iter().copied();
            let mut rs = l.sections.right.iter().copied();
            if let (Some(&pl), Some(&pr)) = (left.last(), right.last()) {
                let (l0, r0) = (l.sections.left[0], l.sections.right[0]);
                if l0.distance(pl) < 1e-6 && r0.distance(pr) < 1e-6 {
                    ls.next();
                    rs.next();
                }
            }
            let start = if left.is_empty() {
                0.0
            } else {
                // arc length so far, plus the joint gap if the bounds do not meet
                let c_prev = Polyline::new(
                    left.iter()
                        .zip(&right)
                        .map(|(a, b): (&Point2, &Point2)| a.lerp(*b, 0.5))
                        .collect(),
                )
                .length();
                let joint_gap = {
                    let prev_mid = left.last().unwrap().lerp(*right.last().unwrap(), 0.5);
                    let next_mid = l.sections.left[0].lerp(l.sections.right[0], 0.5);
                    prev_mid.distance(next_mid)
                };
                c_prev + joint_gap
            };
            offsets.push(start);
            left.extend(ls);
            right.extend(rs);
        }
        let center = left
            .iter()
            .zip(&right)
            .map(|(l, r)| l.lerp(*r, 0.5))
            .collect();
        Ok(Lane {
            ids: ids.to_vec(),
            offsets,
            sections: Sections {
                left,
                right,
                center: Polyline::new(center),
            },
        })
    }

    pub fn ids(&self) -> &[LaneletId] {
        &self.ids
    }

    pub fn length(&self) -> f64 {
        self.sections.len()
    }

    /// Start arc length of `id` within this lane.
    pub fn offset_of(&self, id: LaneletId) -> Option<f64> {
        self.ids
            .iter()
            .position(|&i| i == id)
            .map(|k| self.offsets[k])
    }

    pub fn point_at(&self, s: f64) -> Point2 {
        self.sections.point_at(s)
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        self.sections.heading_at(s)
    }

    pub fn half_width_at(&self, s: f64) -> f64 {
        self.sections.half_width_at(s)
    }

    pub fn to_cartesian(&self, s: f64, d: f64) -> Point2 {
        self.sections.point_at(s) + Point2::from_angle(self.heading_at(s)).perp() * d
    }

    /// `(s, d, distance-to-centerline)` of the closest centerline point.
    pub fn project(&self, p: Point2) -> (f64, f64, f64) {
        self.sections.project(p)
    }

    /// The lanelet hosting arc length `s`.
    pub fn lanelet_at(&self, s: f64) -> LaneletId {
        let k = self.offsets.iter().rposition(|&o| o <= s).unwrap_or(0);
        self.ids[k]
    }

    fn check_range(&self, s_from: f64, s_to: f64) -> Result<(), MapError> {
        let len = self.length();
        let ok = s_from.is_finite()
            && s_to.is_finite()
            && s_from <= s_to
            && s_from >= -1e-9
            && s_to <= len + 1e-9;
        if ok {
            Ok(())
        } else {
            Err(MapError::RangeOutsideLane {
                from: s_from,
                to: s_to,
                length: len,
            })
        }
    }

    fn buffered_stations(&self, s_from: f64, s_to: f64) -> Vec<(Point2, Point2)> {
        let st = self
            .sections
            .stations(s_from - CORRIDOR_BUFFER, s_to + CORRIDOR_BUFFER);
        self.sections.buffered_sections(&st, CORRIDOR_BUFFER)
    }

    /// Lane surface between the cross-sections at `s_from` and `s_to`,
    /// outward-buffered by [`CORRIDOR_BUFFER`].
    pub fn corridor(&self, s_from: f64, s_to: f64) -> Result<Polygon2, MapError> {
        self.check_range(s_from, s_to)?;
        let secs = self.buffered_stations(s_from, s_to);
        let mut ring: Vec<Point2> = secs.iter().map(|s| s.0).collect();
        ring.extend(secs.iter().rev().map(|s| s.1));
        Polygon2::new(ring).map_err(|e| MapError::InvalidLanelet {
            id: self.ids[0],
            reason: format!("corridor: {e}"),
        })
    }

    /// The same surface as [`Lane::corridor`], split into convex runs of consecutive
    /// cross-section quads.
    pub fn corridor_pieces(&self, s_from: f64, s_to: f64) -> Result<Vec<Polygon2>, MapError> {
        self.check_range(s_from, s_to)?;
        let secs = self.buffered_stations(s_from, s_to);
        let ring_of = |a: usize, b: usize| -> Vec<Point2> {
            let mut ring: Vec<Point2> = (a..=b).rev().map(|i| secs[i].0).collect();
            ring.extend((a..=b).map(|i| secs[i].1));
            ring
        };
        let convex = |ring: &[Point2]| {
            let n = ring.len();
            (0..n).all(|k| {
                let (a, b, c) = (ring[k], ring[(k + 1) % n], ring[(k + 2) % n]);
                (b - a).cross(c - b) >= -1e-12
            })
        };
        let mut out = Vec::new();
        let mut start = 0;
        let mut end = 1;
        while end < secs.len() {
            if end + 1 < secs.len() && convex(&ring_of(start, end + 1)) {
                end += 1;
                continue;
            }
            if let Some(p) = Polygon2::from_ring_unchecked(ring_of(start, end)) {
                if p.is_convex() {
                    out.push(p);
                } else {
                    out.extend(convex_pieces(&p));
                }
            }
            start = end;
            end += 1;
        }
        Ok(out)
    }
}
