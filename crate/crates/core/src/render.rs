//! Per-step snapshots and their SVG rendering.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::{Aabb, Point2, Polygon2};
use crate::planner::{EgoState, PlanKind, Verdict};
use crate::prediction::OccupancyTimeline;
use crate::sensing::CriticalEdge;

const MARGIN: f64 = 5.0;
const PIXELS_PER_METER: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedPolygon {
    pub id: String,
    pub polygon: Polygon2,
}

/// Everything needed to redraw one simulation step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema_version: u32,
    pub k: usize,
    pub t_s: f64,
    pub lanelets: Vec<NamedPolygon>,
    pub static_obstacles: Vec<NamedPolygon>,
    pub dynamic_obstacles: Vec<NamedPolygon>,
    pub fov: Option<Polygon2>,
    pub edges: Vec<CriticalEdge>,
    pub occupancies: OccupancyTimeline,
    pub ego: EgoState,
    pub ego_footprint: Polygon2,
    pub trajectory: Vec<Point2>,
    pub kind: PlanKind,
    pub verdict: Verdict,
}

impl Snapshot {
    /// A snapshot with map and ego only.
    pub fn map_only(
        lanelets: Vec<NamedPolygon>,
        ego: EgoState,
        ego_footprint: Polygon2,
    ) -> Snapshot {
        Snapshot {
            schema_version: crate::scenario::SCHEMA_VERSION,
            k: 0,
            t_s: 0.0,
            lanelets,
            static_obstacles: Vec::new(),
            dynamic_obstacles: Vec::new(),
            fov: None,
            edges: Vec::new(),
            occupancies: OccupancyTimeline {
                t0: 0.0,
                dt: 0.1,
                steps: Vec::new(),
            },
            ego,
            ego_footprint,
            trajectory: Vec::new(),
            kind: PlanKind::Fallback,
            verdict: Verdict::Safe,
        }
    }
}

fn path_data(p: &Polygon2) -> String {
    let mut s = String::new();
    for (i, v) in p.vertices().iter().enumerate() {
        let _ = write!(
            s,
            "{}{:.3},{:.3} ",
            if i == 0 { "M" } else { "L" },
            v.x,
            -v.y
        );
    }
    s.push('Z');
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn polygon_el(out: &mut String, p: &Polygon2, style: &str) {
    let _ = writeln!(out, "    <path d=\"{}\" {style}/>", path_data(p));
}

fn bounds(snap: &Snapshot) -> Aabb {
    let mut pts: Vec<Point2> = snap
        .lanelets
        .iter()
        .flat_map(|l| l.polygon.vertices().to_vec())
        .collect();
    pts.extend(
        snap.static_obstacles
            .iter()
            .flat_map(|o| o.polygon.vertices().to_vec()),
    );
    pts.extend(snap.ego_footprint.vertices().iter().copied());
    Aabb::from_points(&pts).expect("snapshot has an ego footprint")
}

/// Renders a snapshot. Layers, bottom to top: map, FOV, static obstacles,
/// occupancies (one group per source, latest step drawn first), critical edges,
/// dynamic obstacles, ego trajectory, ego.
pub fn render_svg(snap: &Snapshot) -> String {
    let bb = bounds(snap);
    let (x0, y0) = (bb.min.x - MARGIN, -bb.max.y - MARGIN);
    let (w, h) = (
        bb.max.x - bb.min.x + 2.0 * MARGIN,
        bb.max.y - bb.min.y + 2.0 * MARGIN,
    );
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"{x0:.3} {y0:.3} {w:.3} {h:.3}\">",
        w * PIXELS_PER_METER,
        h * PIXELS_PER_METER
    );
    let _ = writeln!(out, "  <title>step {} t={:.2}s</title>", snap.k, snap.t_s);

    out.push_str("  <g id=\"map\">\n");
    for l in &snap.lanelets {
        polygon_el(
            &mut out,
            &l.polygon,
            "fill=\"#e6e6e6\" stroke=\"#999\" stroke-width=\"0.05\"",
        );
    }
    out.push_str("  </g>\n");

    if let Some(fov) = &snap.fov {
        out.push_str("  <g id=\"fov\">\n");
        polygon_el(
            &mut out,
            fov,
            "fill=\"#7fbf7f\" fill-opacity=\"0.25\" stroke=\"#3a3\" stroke-width=\"0.05\"",
        );
        out.push_str("  </g>\n");
    }

    out.push_str("  <g id=\"static\">\n");
    for o in &snap.static_obstacles {
        polygon_el(&mut out, &o.polygon, "fill=\"#555\"");
    }
    out.push_str("  </g>\n");

    let mut sources: Vec<&str> = Vec::new();
    for step in &snap.occupancies.steps {
        for o in &step.occupancies {
            if !sources.contains(&o.source.as_str()) {
                sources.push(&o.source);
            }
        }
    }
    out.push_str("  <g id=\"occupancies\">\n");
    for src in sources {
        let class = if src.starts_with("edge:") {
            "hazard edge"
        } else {
            "hazard"
        };
        let _ = writeln!(
            out,
            "   <g class=\"{class}\" data-source=\"{}\">",
            escape(src)
        );
        for step in snap.occupancies.steps.iter().rev() {
            for o in step.occupancies.iter().filter(|o| o.source == src) {
                for p in &o.polygons {
                    polygon_el(
                        &mut out,
                        p,
                        "fill=\"#d33\" fill-opacity=\"0.08\" stroke=\"none\"",
                    );
                }
            }
        }
        out.push_str("   </g>\n");
    }
    out.push_str("  </g>\n");

    out.push_str("  <g id=\"edges\">\n");
    for e in &snap.edges {
        let color = if e.relevant { "#c00" } else { "#888" };
        let _ = writeln!(
            out,
            "    <line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"{color}\" stroke-width=\"0.3\"/>",
            e.segment.a.x, -e.segment.a.y, e.segment.b.x, -e.segment.b.y
        );
    }
    out.push_str("  </g>\n");

    out.push_str("  <g id=\"dynamic\">\n");
    for o in &snap.dynamic_obstacles {
        polygon_el(&mut out, &o.polygon, "fill=\"#36c\"");
    }
    out.push_str("  </g>\n");

    if snap.trajectory.len() > 1 {
        let pts: Vec<String> = snap
            .trajectory
            .iter()
            .map(|p| format!("{:.3},{:.3}", p.x, -p.y))
            .collect();
        let _ = writeln!(
            out,
            "  <polyline id=\"trajectory\" points=\"{}\" fill=\"none\" stroke=\"#f90\" stroke-width=\"0.15\"/>",
            pts.join(" ")
        );
    }
    out.push_str("  <g id=\"ego\">\n");
    let color = if snap.verdict.is_safe() {
        "#f90"
    } else {
        "#a0f"
    };
    polygon_el(&mut out, &snap.ego_footprint, &format!("fill=\"{color}\""));
    out.push_str("  </g>\n</svg>\n");
    out
}

/// Writes `step_NNNNN.json` and `step_NNNNN.svg` for every snapshot.
pub fn emit_snapshots(snapshots: &[Snapshot], dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for snap in snapshots {
        let stem = format!("step_{:05}", snap.k);
        let json = serde_json::to_string(snap).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        std::fs::write(dir.join(format!("{stem}.svg")), render_svg(snap))?;
    }
    Ok(())
}
