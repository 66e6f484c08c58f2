//! Planar geometry kernel.
//!
//! Double precision throughout, with an absolute tolerance of [`EPS`] for
//! degeneracy tests. Occupancies are over-approximations, so callers buffer
//! outward where floating-point shrinkage could matter.

mod clip;
mod hull;
mod point;
mod polygon;

pub use clip::{
    clip_convex, convex_pieces, intersect_polygons, polygons_overlap, segment_inside_intervals,
};
pub use hull::convex_hull;
pub use point::{
    normalize_angle, point_segment_distance, project_onto_segment, segment_intersection, Aabb,
    Point2, Pose2, Segment2,
};
pub use polygon::{signed_area, winding_number, Polygon2};

/// Absolute degeneracy tolerance in meters.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeomError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("polygon is not simple")]
    NotSimple,
    #[error("non-finite coordinate")]
    NonFinite,
}

/// Symmetric Hausdorff distance between the vertex sets and boundaries of two polygons.
pub fn hausdorff_distance(a: &Polygon2, b: &Polygon2) -> f64 {
    let one_way = |p: &Polygon2, q: &Polygon2| {
        p.vertices()
            .iter()
            .map(|&v| q.boundary_distance(v))
            .fold(0.0_f64, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}
