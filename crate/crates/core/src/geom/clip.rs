use super::hull::drop_near_collinear_ring;
use super::point::{point_segment_distance, project_onto_segment, segment_intersection, Point2};
use super::polygon::Polygon2;

/// Results with less area than this are treated as touching contact.
const MIN_AREA: f64 = 1e-12;

/// Sutherland–Hodgman clip of `subject` by the convex polygon `clip`.
///
/// `subject` must be convex for the result to be a single simple polygon.
pub fn clip_convex(subject: &Polygon2, clip: &Polygon2) -> Option<Polygon2> {
    if !subject.aabb().overlaps(&clip.aabb(), 0.0) {
        return None;
    }
    let mut ring: Vec<Point2> = subject.vertices().to_vec();
    for (c1, c2) in clip.edges() {
        if ring.is_empty() {
            return None;
        }
        let e = c2 - c1;
        let len = e.norm();
        let side = |p: Point2| e.cross(p - c1) / len;
        let mut out = Vec::with_capacity(ring.len() + 2);
        let n = ring.len();
        for i in 0..n {
            let p = ring[i];
            let q = ring[(i + 1) % n];
            let dp = side(p);
            let dq = side(q);
            if dp >= 0.0 {
                out.push(p);
            }
            if (dp >= 0.0) != (dq >= 0.0) {
                let t = dp / (dp - dq);
                out.push(p.lerp(q, t));
            }
        }
        ring = out;
    }
    let poly = Polygon2::from_ring_unchecked(ring)?;
    (poly.area() > MIN_AREA).then_some(poly)
}

/// Splits a simple polygon into interior-disjoint convex pieces
/// (ear clipping followed by Hertel–Mehlhorn merging).
pub fn convex_pieces(poly: &Polygon2) -> Vec<Polygon2> {
    if poly.is_convex() {
        return vec![poly.clone()];
    }
    let ring = drop_near_collinear_ring(poly.vertices().to_vec());
    if ring.len() < 3 {
        return Vec::new();
    }
    let mut pieces: Vec<Vec<usize>> = triangulate(&ring).into_iter().map(|t| t.to_vec()).collect();

    let mut merged = true;
    while merged {
        merged = false;
        'outer: for i in 0..pieces.len() {
            for j in i + 1..pieces.len() {
                if let Some(m) = try_merge(&ring, &pieces[i], &pieces[j]) {
                    pieces[i] = m;
                    pieces.swap_remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
    }

    pieces
        .into_iter()
        .filter_map(|idx| Polygon2::from_ring_unchecked(idx.iter().map(|&k| ring[k]).collect()))
        .filter(|p| p.area() > MIN_AREA)
        .collect()
}

fn left_turn(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - b)
}

fn in_triangle(p: Point2, a: Point2, b: Point2, c: Point2) -> bool {
    let d1 = (b - a).cross(p - a);
    let d2 = (c - b).cross(p - b);
    let d3 = (a - c).cross(p - c);
    d1 >= -1e-12 && d2 >= -1e-12 && d3 >= -1e-12
}

/// Ear clipping on a counterclockwise ring without collinear vertices.
fn triangulate(ring: &[Point2]) -> Vec<[usize; 3]> {
    let mut idx: Vec<usize> = (0..ring.len()).collect();
    let mut tris = Vec::with_capacity(ring.len());
    while idx.len() > 3 {
        let m = idx.len();
        let mut ear = None;
        for i in 0..m {
            let (ip, ic, inx) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            let (a, b, c) = (ring[ip], ring[ic], ring[inx]);
            if left_turn(a, b, c) <= 1e-12 {
                continue;
            }
            let blocked = idx.iter().any(|&k| {
                k != ip
                    && k != ic
                    && k != inx
                    && ring[k] != a
                    && ring[k] != b
                    && ring[k] != c
                    && in_triangle(ring[k], a, b, c)
            });
            if !blocked {
                ear = Some(i);
                break;
            }
        }
        // numerical trouble: cut the most convex vertex rather than loop forever
        let i = ear.unwrap_or_else(|| {
            (0..m)
                .max_by(|&x, &y| {
                    let tx = left_turn(
                        ring[idx[(x + m - 1) % m]],
                        ring[idx[x]],
                        ring[idx[(x + 1) % m]],
                    );
                    let ty = left_turn(
                        ring[idx[(y + m - 1) % m]],
                        ring[idx[y]],
                        ring[idx[(y + 1) % m]],
                    );
                    tx.total_cmp(&ty)
                })
                .unwrap()
        });
        tris.push([idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]]);
        idx.remove(i);
    }
    tris.push([idx[0], idx[1], idx[2]]);
    tris
}

fn try_merge(ring: &[Point2], a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let na = a.len();
    let nb = b.len();
    for i in 0..na {
        let (u, v) = (a[i], a[(i + 1) % na]);
        let Some(j) = (0..nb).find(|&j| b[j] == v && b[(j + 1) % nb] == u) else {
            continue;
        };
        // a rotated to [v .. u], b rotated to [u .. v]
        let mut merged: Vec<usize> = (0..na).map(|k| a[(i + 1 + k) % na]).collect();
        merged.extend((1..nb - 1).map(|k| b[(j + 1 + k) % nb]));
        let m = merged.len();
        let convex = (0..m).all(|k| {
            left_turn(
                ring[merged[k]],
                ring[merged[(k + 1) % m]],
                ring[merged[(k + 2) % m]],
            ) >= -1e-12
        });
        return convex.then_some(merged);
    }
    None
}

/// Intersection of two simple polygons as interior-disjoint convex pieces.
/// Touching contact (zero area) yields no pieces.
pub fn intersect_polygons(a: &Polygon2, b: &Polygon2) -> Vec<Polygon2> {
    if !a.aabb().overlaps(&b.aabb(), 0.0) {
        return Vec::new();
    }
    if a.is_convex() && b.is_convex() {
        return clip_convex(a, b).into_iter().collect();
    }
    let pa = convex_pieces(a);
    let pb = convex_pieces(b);
    let mut out = Vec::new();
    for p in &pa {
        for q in &pb {
            if let Some(r) = clip_convex(p, q) {
                out.push(r);
            }
        }
    }
    out
}

/// True when the two polygons share interior area (convex fast path when possible).
pub fn polygons_overlap(a: &Polygon2, b: &Polygon2) -> bool {
    if !a.aabb().overlaps(&b.aabb(), 0.0) {
        return false;
    }
    if a.is_convex() && b.is_convex() {
        return clip_convex(a, b).is_some();
    }
    !intersect_polygons(a, b).is_empty()
}

/// Parameter intervals `[t0, t1] ⊆ [0, 1]` of segment `a`–`b` that lie inside `poly`
/// (boundary counts as inside), merged and sorted.
pub fn segment_inside_intervals(a: Point2, b: Point2, poly: &Polygon2) -> Vec<(f64, f64)> {
    if !poly
        .aabb()
        .overlaps(&super::point::Aabb::from_points([&a, &b]).unwrap(), 1e-9)
    {
        return Vec::new();
    }
    let mut ts = vec![0.0, 1.0];
    for (p, q) in poly.edges() {
        if let Some((t, _)) = segment_intersection(a, b, p, q) {
            ts.push(t);
        }
    }
    for &v in poly.vertices() {
        if point_segment_distance(v, a, b) <= 1e-9 {
            ts.push(project_onto_segment(v, a, b));
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12);

    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if poly.contains_point(a.lerp(b, 0.5 * (t0 + t1)), 1e-9) {
            match out.last_mut() {
                Some(last) if (last.1 - t0).abs() <= 1e-12 => last.1 = t1,
                _ => out.push((t0, t1)),
            }
        }
    }
    out
}
