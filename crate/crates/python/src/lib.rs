//! Python bindings: geometry helpers, the occupancy models, and scenario
//! loading, simulation, prediction and verification. Structured results are
//! returned as JSON strings.

use std::path::PathBuf;

use occsafe::geom::{convex_hull as hull, intersect_polygons, Point2, Polygon2, Pose2};
use occsafe::occupancy::{self, DynamicsAssumptions, FanParams};
use occsafe::planner::{resample, verify, TrajectorySample};
use occsafe::scenario::{load_scenario, parse_scenario};
use occsafe::sim::{perceive, run, RunFlags};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

type Pts = Vec<(f64, f64)>;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_polygon(pts: Pts) -> PyResult<Polygon2> {
    Polygon2::new(pts.into_iter().map(|(x, y)| Point2::new(x, y)).collect()).map_err(value_err)
}

fn from_polygon(p: &Polygon2) -> Pts {
    p.vertices().iter().map(|v| (v.x, v.y)).collect()
}

fn dynamics(a_max: f64, v_max: f64, v_switch: Option<f64>) -> DynamicsAssumptions {
    DynamicsAssumptions {
        a_max,
        v_abs_max: v_max,
        v_switch: v_switch.unwrap_or(f64::INFINITY),
    }
}

/// Initial-state set of an obstacle: position on a segment, heading and speed
/// intervals.
#[pyclass(name = "IntervalState", from_py_object)]
#[derive(Clone)]
struct PyIntervalState {
    inner: occupancy::IntervalState,
}

#[pymethods]
impl PyIntervalState {
    #[new]
    #[pyo3(signature = (pos_a, pos_b, heading_lo, heading_hi, v_lo, v_hi))]
    fn new(
        pos_a: (f64, f64),
        pos_b: (f64, f64),
        heading_lo: f64,
        heading_hi: f64,
        v_lo: f64,
        v_hi: f64,
    ) -> PyResult<Self> {
        let inner = occupancy::IntervalState {
            pos_a: Point2::new(pos_a.0, pos_a.1),
            pos_b: Point2::new(pos_b.0, pos_b.1),
            heading_lo,
            heading_hi,
            v_lo,
            v_hi,
        };
        inner.validate().map_err(value_err)?;
        Ok(PyIntervalState { inner })
    }

    #[staticmethod]
    fn point(pos: (f64, f64), heading: f64, v: f64) -> Self {
        PyIntervalState {
            inner: occupancy::IntervalState::point(Point2::new(pos.0, pos.1), heading, v),
        }
    }

    #[getter]
    fn heading_lo(&self) -> f64 {
        self.inner.heading_lo
    }

    #[getter]
    fn heading_hi(&self) -> f64 {
        self.inner.heading_hi
    }

    #[getter]
    fn v_lo(&self) -> f64 {
        self.inner.v_lo
    }

    #[getter]
    fn v_hi(&self) -> f64 {
        self.inner.v_hi
    }

    fn __repr__(&self) -> String {
        let s = &self.inner;
        format!(
            "IntervalState(pos_a=({}, {}), pos_b=({}, {}), heading=[{}, {}], v=[{}, {}])",
            s.pos_a.x, s.pos_a.y, s.pos_b.x, s.pos_b.y, s.heading_lo, s.heading_hi, s.v_lo, s.v_hi
        )
    }
}

/// Free-space occupancy polygon over `[t_k, t_k1]`.
#[pyfunction]
#[pyo3(signature = (state, t_k, t_k1, a_max = 10.0, fan_segments = 3))]
fn m1_occupancy(
    state: &PyIntervalState,
    t_k: f64,
    t_k1: f64,
    a_max: f64,
    fan_segments: u32,
) -> PyResult<Pts> {
    let dyn_ = dynamics(a_max, f64::INFINITY, None);
    let fan = FanParams {
        segments: fan_segments,
    };
    let p = occupancy::m1_occupancy(&state.inner, &dyn_, fan, t_k, t_k1).map_err(value_err)?;
    Ok(from_polygon(&p))
}

/// Occupancy of an obstacle with known position, heading and speed.
#[pyfunction]
#[pyo3(signature = (pos, heading, v, t_k, t_k1, a_max = 10.0))]
fn m1_point_occupancy(
    pos: (f64, f64),
    heading: f64,
    v: f64,
    t_k: f64,
    t_k1: f64,
    a_max: f64,
) -> PyResult<Pts> {
    let p = occupancy::m1_point_occupancy(Point2::new(pos.0, pos.1), heading, v, a_max, t_k, t_k1)
        .map_err(value_err)?;
    Ok(from_polygon(&p))
}

/// Farthest distance along a lane reachable within `t` from speed `v0`.
#[pyfunction]
#[pyo3(signature = (v0, t, a_max = 10.0, v_max = 15.4, v_switch = None))]
fn xi_front(v0: f64, t: f64, a_max: f64, v_max: f64, v_switch: Option<f64>) -> f64 {
    occupancy::xi_front(v0, &dynamics(a_max, v_max, v_switch), t)
}

#[pyfunction]
fn convex_hull(points: Pts) -> PyResult<Pts> {
    let pts: Vec<Point2> = points.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
    Ok(from_polygon(&hull(&pts).map_err(value_err)?))
}

#[pyfunction]
fn polygon_area(polygon: Pts) -> PyResult<f64> {
    Ok(to_polygon(polygon)?.area())
}

#[pyfunction]
fn intersection_area(a: Pts, b: Pts) -> PyResult<f64> {
    let (a, b) = (to_polygon(a)?, to_polygon(b)?);
    Ok(intersect_polygons(&a, &b).iter().map(Polygon2::area).sum())
}

/// A validated scenario.
#[pyclass(name = "Scenario")]
struct PyScenario {
    inner: occsafe::scenario::Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        load_scenario(&path)
            .map(|inner| PyScenario { inner })
            .map_err(|e| match e {
                occsafe::scenario::ScenarioError::Io { .. } => PyIOError::new_err(e.to_string()),
                _ => value_err(e),
            })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_scenario(text)
            .map(|inner| PyScenario { inner })
            .map_err(value_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn route(&self) -> Vec<u32> {
        self.inner.ego.route.iter().map(|id| id.0).collect()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    /// Runs the closed loop and returns the simulation log as JSON.
    #[pyo3(signature = (occlusion_aware = true, seed = 0, duration = None))]
    fn simulate(
        &self,
        py: Python<'_>,
        occlusion_aware: bool,
        seed: u64,
        duration: Option<f64>,
    ) -> PyResult<String> {
        let flags = RunFlags {
            occlusion_aware,
            seed,
            record_snapshots: false,
            duration,
        };
        let out = py.detach(|| run(&self.inner, &flags)).map_err(value_err)?;
        Ok(out.log.to_json())
    }

    /// Critical edges and occupancy timeline seen from the ego's initial state at
    /// `time`, as JSON.
    #[pyo3(signature = (time = 0.0, occlusion_aware = true))]
    fn predict(&self, time: f64, occlusion_aware: bool) -> PyResult<String> {
        let scn = &self.inner;
        let s = scn.ego.s0;
        let pose = Pose2::new(scn.ego.path.point_at(s), scn.ego.path.heading_at(s));
        let p = perceive(scn, pose, s, time, occlusion_aware).map_err(value_err)?;
        let out =
            serde_json::json!({ "edges": p.edges, "visible": p.visible, "timeline": p.timeline });
        Ok(out.to_string())
    }

    /// Checks a trajectory of `(t, x, y, heading, v)` samples against the
    /// occupancies predicted from its first pose. Returns the verdict as JSON.
    #[pyo3(signature = (samples, time = 0.0, occlusion_aware = true))]
    fn verify(
        &self,
        samples: Vec<(f64, f64, f64, f64, f64)>,
        time: f64,
        occlusion_aware: bool,
    ) -> PyResult<String> {
        let scn = &self.inner;
        let samples: Vec<TrajectorySample> = samples
            .into_iter()
            .map(|(t, x, y, heading, v)| TrajectorySample {
                t,
                x,
                y,
                heading,
                v,
            })
            .collect();
        let traj = resample(&samples, time, scn.dt, scn.prediction.steps()).map_err(value_err)?;
        let start = traj.states[0].ego.pose;
        let (s, _, _) = scn.ego.path.project(start.position);
        let p = perceive(scn, start, s, time, occlusion_aware).map_err(value_err)?;
        let verdict = verify(&traj, &p.timeline, &scn.ego.shape).map_err(value_err)?;
        serde_json::to_string(&verdict).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, route={:?})",
            self.inner.name,
            self.route()
        )
    }
}

#[pymodule]
fn pyoccsafe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIntervalState>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(m1_occupancy, m)?)?;
    m.add_function(wrap_pyfunction!(m1_point_occupancy, m)?)?;
    m.add_function(wrap_pyfunction!(xi_front, m)?)?;
    m.add_function(wrap_pyfunction!(convex_hull, m)?)?;
    m.add_function(wrap_pyfunction!(polygon_area, m)?)?;
    m.add_function(wrap_pyfunction!(intersection_area, m)?)?;
    Ok(())
}
