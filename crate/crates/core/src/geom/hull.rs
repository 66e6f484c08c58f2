use super::point::Point2;
use super::polygon::Polygon2;
use super::{GeomError, EPS};

/// Strict convex hull (collinear points dropped), counterclockwise.
pub fn convex_hull(points: &[Point2]) -> Result<Polygon2, GeomError> {
    if points.iter().any(|p| !p.is_finite()) {
        return Err(GeomError::NonFinite);
    }
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| a.distance(*b) <= EPS);
    if pts.len() < 3 {
        return Err(GeomError::DegenerateInput("fewer than 3 distinct points"));
    }

    let turn = |o: Point2, a: Point2, b: Point2| (a - o).cross(b - o);
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();

    let hull = drop_near_collinear_ring(hull);
    if hull.len() < 3 {
        return Err(GeomError::DegenerateInput("all points collinear"));
    }
    Polygon2::from_ring_unchecked(hull).ok_or(GeomError::DegenerateInput("all points collinear"))
}

/// Removes vertices that are within `EPS` of the chord through their neighbours,
/// and vertices that coincide with a neighbour.
pub(crate) fn drop_near_collinear_ring(mut ring: Vec<Point2>) -> Vec<Point2> {
    loop {
        let n = ring.len();
        if n < 3 {
            return ring;
        }
        let mut removed = false;
        for i in 0..n {
            let prev = ring[(i + n - 1) % n];
            let cur = ring[i];
            let next = ring[(i + 1) % n];
            let chord = next - prev;
            let len = chord.norm();
            let off = if len <= EPS {
                cur.distance(prev)
            } else {
                chord.cross(cur - prev).abs() / len
            };
            if off <= EPS || cur.distance(prev) <= EPS {
                ring.remove(i);
                removed = true;
                break;
            }
        }
        if !removed {
            return ring;
        }
    }
}
