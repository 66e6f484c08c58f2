use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::point::{point_segment_distance, segment_intersection, Aabb, Point2, Pose2};
use super::{convex_hull, GeomError, EPS};

/// A simple polygon with counterclockwise vertex order, closed implicitly.
///
/// Construct with [`Polygon2::new`], which validates and normalizes the input:
/// duplicate consecutive vertices are merged, clockwise input is reversed, and
/// self-intersecting input is rejected.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Polygon2 {
    vertices: Vec<Point2>,
}

impl<'de> Deserialize<'de> for Polygon2 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pts = Vec::<Point2>::deserialize(d)?;
        Polygon2::new(pts).map_err(serde::de::Error::custom)
    }
}

impl Polygon2 {
    pub fn new(points: Vec<Point2>) -> Result<Self, GeomError> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        let mut vertices = dedup_ring(points);
        if vertices.len() < 3 {
            return Err(GeomError::DegenerateInput("fewer than 3 distinct vertices"));
        }
        let area = signed_area(&vertices);
        if area.abs() <= EPS * EPS {
            return Err(GeomError::DegenerateInput("zero-area polygon"));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        if !ring_is_simple(&vertices) {
            return Err(GeomError::NotSimple);
        }
        Ok(Polygon2 { vertices })
    }

    /// Skips the simplicity check. The caller guarantees a simple ring; orientation
    /// and duplicates are still normalized. Returns `None` for degenerate rings.
    pub(crate) fn from_ring_unchecked(points: Vec<Point2>) -> Option<Self> {
        let mut vertices = dedup_ring(points);
        if vertices.len() < 3 {
            return None;
        }
        let area = signed_area(&vertices);
        if area.abs() <= EPS * EPS {
            return None;
        }
        if area < 0.0 {
            vertices.reverse();
        }
        Some(Polygon2 { vertices })
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeomError> {
        Polygon2::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    /// Rectangle of `length × width` centred on `pose`, long side along the heading.
    pub fn oriented_rectangle(pose: Pose2, length: f64, width: f64) -> Result<Self, GeomError> {
        let (hl, hw) = (0.5 * length, 0.5 * width);
        let local = Polygon2::rectangle(-hl, -hw, hl, hw)?;
        Ok(local.transform(&pose))
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point2> {
        self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges as `(start, end)` pairs, including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(b)).sum()
    }

    pub fn centroid(&self) -> Point2 {
        let a = self.area();
        let mut c = Point2::ORIGIN;
        for (p, q) in self.edges() {
            let w = p.cross(q);
            c += (p + q) * w;
        }
        c * (1.0 / (6.0 * a))
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices).expect("polygon has vertices")
    }

    /// True when every turn is a left turn (collinear vertices tolerated).
    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            let e1 = b - a;
            let e2 = c - b;
            e1.cross(e2) >= -1e-12 * e1.norm().max(1.0) * e2.norm().max(1.0)
        })
    }

    /// Distance from `q` to the polygon boundary.
    pub fn boundary_distance(&self, q: Point2) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(q, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// True iff `q` is inside or within `tol` of the boundary.
    pub fn contains_point(&self, q: Point2, tol: f64) -> bool {
        if winding_number(&self.vertices, q) != 0 {
            return true;
        }
        self.boundary_distance(q) <= tol.max(0.0)
    }

    /// Every vertex of `other` lies in `self` (with tolerance). Exact containment for
    /// convex `self`; for non-convex `self` edges are additionally checked for crossings.
    pub fn contains_polygon(&self, other: &Polygon2, tol: f64) -> bool {
        if !other.vertices.iter().all(|&p| self.contains_point(p, tol)) {
            return false;
        }
        if self.is_convex() {
            return true;
        }
        // a proper crossing means part of `other` leaves `self`
        for (a, b) in other.edges() {
            for (c, d) in self.edges() {
                if let Some((t, u)) = segment_intersection(a, b, c, d) {
                    if t > 1e-9 && t < 1.0 - 1e-9 && u > 1e-9 && u < 1.0 - 1e-9 {
                        let mid_before = a.lerp(b, (t - 1e-6).max(0.0));
                        let mid_after = a.lerp(b, (t + 1e-6).min(1.0));
                        if !self.contains_point(mid_before, tol)
                            || !self.contains_point(mid_after, tol)
                        {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    pub fn translate(&self, d: Point2) -> Polygon2 {
        Polygon2 {
            vertices: self.vertices.iter().map(|&p| p + d).collect(),
        }
    }

    /// Rotates by `pose.heading` about the origin, then translates by `pose.position`.
    pub fn transform(&self, pose: &Pose2) -> Polygon2 {
        Polygon2 {
            vertices: self.vertices.iter().map(|&p| pose.apply(p)).collect(),
        }
    }

    /// Outward buffer by `radius` using a circumscribed octagon as the disc.
    /// The result is convex: for non-convex input it is the buffered hull.
    pub fn buffered(&self, radius: f64) -> Polygon2 {
        if radius <= 0.0 {
            return self.clone();
        }
        let r = radius / (PI / 8.0).cos();
        let mut pts = Vec::with_capacity(self.vertices.len() * 8);
        for &v in &self.vertices {
            for k in 0..8 {
                let ang = PI / 8.0 + k as f64 * PI / 4.0;
                pts.push(v + Point2::from_angle(ang) * r);
            }
        }
        convex_hull(&pts).expect("buffered polygon is non-degenerate")
    }
}

/// Shoelace signed area; positive for counterclockwise rings.
pub fn signed_area(ring: &[Point2]) -> f64 {
    let n = ring.len();
    let mut s = 0.0;
    for i in 0..n {
        s += ring[i].cross(ring[(i + 1) % n]);
    }
    0.5 * s
}

/// Winding number of `ring` around `q` (0 means outside).
pub fn winding_number(ring: &[Point2], q: Point2) -> i32 {
    let n = ring.len();
    let mut wn = 0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let side = (b - a).cross(q - a);
        if a.y <= q.y {
            if b.y > q.y && side > 0.0 {
                wn += 1;
            }
        } else if b.y <= q.y && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn dedup_ring(points: Vec<Point2>) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::with_capacity(points.len());
    for p in points {
        if out.last().is_none_or(|&l: &Point2| l.distance(p) > EPS) {
            out.push(p);
        }
    }
    while out.len() > 1 && out[0].distance(out[out.len() - 1]) <= EPS {
        out.pop();
    }
    out
}

/// No two non-adjacent edges touch, and adjacent edges only share their vertex.
fn ring_is_simple(ring: &[Point2]) -> bool {
    let n = ring.len();
    if n == 3 {
        return true;
    }
    let bbs: Vec<Aabb> = (0..n)
        .map(|i| Aabb::from_points([&ring[i], &ring[(i + 1) % n]]).unwrap())
        .collect();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        for j in i + 1..n {
            if !bbs[i].overlaps(&bbs[j], EPS) {
                continue;
            }
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // adjacent edges folding back onto each other
                let shared = if j == i + 1 { b } else { a };
                let (p, q) = if j == i + 1 { (a, d) } else { (b, c) };
                let e1 = p - shared;
                let e2 = q - shared;
                if e1.cross(e2).abs() <= 1e-12 * e1.norm() * e2.norm() && e1.dot(e2) > 0.0 {
                    return false;
                }
                continue;
            }
            if segments_touch(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

fn segments_touch(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    if segment_intersection(a, b, c, d).is_some() {
        return true;
    }
    point_segment_distance(a, c, d) <= EPS
        || point_segment_distance(b, c, d) <= EPS
        || point_segment_distance(c, a, b) <= EPS
        || point_segment_distance(d, a, b) <= EPS
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polygon2 {
        Polygon2::rectangle(0.0, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn clockwise_input_is_reversed() {
        let p = Polygon2::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(p.area() > 0.0);
    }

    #[test]
    fn bowtie_rejected() {
        let r = Polygon2::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 1.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.0, 2.0),
        ]);
        assert_eq!(r, Err(GeomError::NotSimple));
    }

    #[test]
    fn too_few_vertices_rejected() {
        assert!(Polygon2::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]).is_err());
        assert!(Polygon2::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0)
        ])
        .is_err());
    }

    #[test]
    fn contains_point_examples() {
        let sq = unit_square();
        assert!(sq.contains_point(Point2::new(0.5, 0.5), 0.0));
        assert!(sq.contains_point(Point2::new(1.0 + 1e-12, 0.5), 1e-9));
        assert!(!sq.contains_point(Point2::new(1.1, 0.5), 1e-9));
        assert!(sq.contains_point(Point2::new(1.0, 0.5), 0.0));
    }

    #[test]
    fn transform_examples() {
        let sq = unit_square();
        assert_eq!(sq.transform(&Pose2::identity()), sq);
        let rot = sq.transform(&Pose2::new(Point2::ORIGIN, PI / 2.0));
        assert!(rot
            .vertices()
            .iter()
            .any(|v| v.distance(Point2::new(0.0, 1.0)) < 1e-12));
        assert!((rot.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn buffer_grows_square() {
        let b = unit_square().buffered(0.1);
        assert!(b.contains_polygon(&unit_square(), 0.0));
        assert!(b.contains_point(Point2::new(1.1, 0.5), 1e-12));
        assert!(b.contains_point(
            Point2::new(
                1.0 + 0.099 * std::f64::consts::FRAC_1_SQRT_2,
                1.0 + 0.099 * std::f64::consts::FRAC_1_SQRT_2
            ),
            1e-12
        ));
        assert!(b.area() < 1.0 + 4.0 * 0.11 + 0.1);
    }

    #[test]
    fn centroid_of_square() {
        let c = unit_square().centroid();
        assert!(c.distance(Point2::new(0.5, 0.5)) < 1e-12);
    }
}
