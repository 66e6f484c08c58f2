//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero if
//! any criterion fails.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use occsafe::geom::{hausdorff_distance, Point2, Polygon2};
use occsafe::lanelet::LaneletId;
use occsafe::occupancy::{
    fan_tip, m1_occupancy, m1_orientation_fan, m1_point_occupancy, m1_velocity_interval,
    velocity_interval_vertices, xi_front, DynamicsAssumptions, FanParams, IntervalState,
};
use occsafe::oracle::{sample_states, SampleConfig};
use occsafe::scenario::{load_scenario, Scenario};
use occsafe::sensing::RejectionReason;
use occsafe::sim::{perceive, run, RunFlags, SimLog};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SOUNDNESS_TOL: f64 = 1e-6;
const SOUNDNESS_CONFIGS: usize = 20;
const SOUNDNESS_SAMPLES: usize = 10_000;
const SOUNDNESS_SEED: u64 = 2024;
const SOUNDNESS_BUDGET: Duration = Duration::from_secs(60);
const HEXAGON_TOL: f64 = 1e-6;
const FAN_TIP_TOL: f64 = 1e-5;
const SWEEP_TOL: f64 = 1e-9;
const SWEEP_ANGLES: usize = 100;
const COLLAPSE_AREA_TOL: f64 = 1e-9;
const COLLAPSE_HAUSDORFF_TOL: f64 = 1e-6;
const COLLAPSE_STATES: usize = 50;
const CLEAR_MIN_SPEED: f64 = 2.4;
const CLEAR_MIN_SPEED_TOL: f64 = 0.5;
const STOP_SPEED: f64 = 1e-3;
const SCENARIO_BUDGET: Duration = Duration::from_secs(60);
const XI_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn scenario(name: &str) -> Scenario {
    load_scenario(&fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn random_interval(rng: &mut ChaCha8Rng) -> IntervalState {
    let v_lo = rng.random_range(0.0..20.0);
    let v_hi = rng.random_range(v_lo..=20.0);
    let half = rng.random_range(0.0..=45f64.to_radians());
    let mid = rng.random_range(-3.0..3.0);
    let pos_a = Point2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
    let len = rng.random_range(0.0..=5.0);
    let pos_b = pos_a + Point2::from_angle(rng.random_range(-3.0..3.0)) * len;
    IntervalState {
        pos_a,
        pos_b,
        heading_lo: mid - half,
        heading_hi: mid + half,
        v_lo,
        v_hi,
    }
}

/// Each configuration is checked over ten steps of 0.1 s, five sample times per step.
fn m1_soundness() -> Outcome {
    let start = Instant::now();
    let dyn_ = DynamicsAssumptions::default();
    let fan = FanParams::default();
    let (dt, steps, per_step) = (0.1, 10usize, 4usize);
    let times: Vec<f64> = (0..=steps * per_step)
        .map(|i| i as f64 * dt / per_step as f64)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SOUNDNESS_SEED);
    let mut violations = 0usize;
    let mut first = None;
    for c in 0..SOUNDNESS_CONFIGS {
        let st = random_interval(&mut rng);
        let cfg = SampleConfig {
            n_samples: SOUNDNESS_SAMPLES,
            seed: SOUNDNESS_SEED + c as u64,
            ..Default::default()
        };
        let traces = sample_states(&st, &dyn_, &times, &cfg, None);
        for k in 0..steps {
            let poly = m1_occupancy(&st, &dyn_, fan, k as f64 * dt, (k + 1) as f64 * dt).unwrap();
            for tr in &traces {
                for p in &tr.positions[k * per_step..=(k + 1) * per_step] {
                    if !poly.contains_point(*p, SOUNDNESS_TOL) {
                        violations += 1;
                        first.get_or_insert((c, k));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        violations == 0 && elapsed < SOUNDNESS_BUDGET,
        format!(
            "{violations} violations over {SOUNDNESS_CONFIGS} configs x {SOUNDNESS_SAMPLES} samples in {:.1} s{}",
            elapsed.as_secs_f64(),
            first.map(|(c, k)| format!(", first at config {c} step {k}")).unwrap_or_default()
        ),
    )
}

fn hexagon() -> Outcome {
    let expect = [
        (0.55, 0.05),
        (1.13333, 0.2),
        (2.2, 0.2),
        (2.2, -0.2),
        (1.13333, -0.2),
        (0.55, -0.05),
    ];
    let q = velocity_interval_vertices(6.0, 10.0, 10.0, 0.1, 0.2).unwrap();
    // the printed values are rounded to five decimals
    let err = q
        .iter()
        .zip(expect)
        .map(|(p, (x, y))| {
            let x = if (x - 1.13333f64).abs() < 1e-12 {
                1.2 - 0.4 / 6.0
            } else {
                x
            };
            (p.x - x).abs().max((p.y - y).abs())
        })
        .fold(0.0, f64::max);
    let rounded = q
        .iter()
        .zip(expect)
        .all(|(p, (x, y))| (p.x - x).abs() < 5e-6 && (p.y - y).abs() < 5e-6);
    outcome(
        err <= HEXAGON_TOL && rounded,
        format!("max vertex error {err:.2e}"),
    )
}

fn fan() -> Outcome {
    let psi = 45f64.to_radians();
    let params = FanParams { segments: 3 };
    let w0 = fan_tip(2.2, psi, params);
    let tip_err = (w0.x - 2.21899).abs().max(w0.y.abs());
    let hex = m1_velocity_interval(6.0, 10.0, 10.0, 0.1, 0.2).unwrap();
    let fanned = m1_orientation_fan(&hex, psi, params, 2.2).unwrap();
    let mut misses = 0;
    for i in 0..SWEEP_ANGLES {
        let a = -psi + 2.0 * psi * i as f64 / (SWEEP_ANGLES - 1) as f64;
        misses += hex
            .vertices()
            .iter()
            .filter(|v| !fanned.contains_point(v.rotate(a), SWEEP_TOL))
            .count();
    }
    outcome(
        tip_err <= FAN_TIP_TOL && misses == 0,
        format!(
            "w0 = ({:.5}, {:.5}), {misses} sweep misses over {SWEEP_ANGLES} angles",
            w0.x, w0.y
        ),
    )
}

fn collapsed_interval() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let dyn_ = DynamicsAssumptions::default();
    let (mut worst_area, mut worst_h) = (0.0f64, 0.0f64);
    for _ in 0..COLLAPSE_STATES {
        let pos = Point2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let heading = rng.random_range(-3.1..3.1);
        let v = rng.random_range(0.0..20.0);
        let k = rng.random_range(0..24) as f64;
        let (t_k, t_k1) = (k * 0.1, (k + 1.0) * 0.1);
        let a: Polygon2 = m1_occupancy(
            &IntervalState::point(pos, heading, v),
            &dyn_,
            FanParams::default(),
            t_k,
            t_k1,
        )
        .unwrap();
        let b = m1_point_occupancy(pos, heading, v, dyn_.a_max, t_k, t_k1).unwrap();
        worst_area = worst_area.max((a.area() - b.area()).abs());
        worst_h = worst_h.max(hausdorff_distance(&a, &b));
    }
    outcome(
        worst_area <= COLLAPSE_AREA_TOL && worst_h <= COLLAPSE_HAUSDORFF_TOL,
        format!(
            "{COLLAPSE_STATES} states, max area diff {worst_area:.2e}, max Hausdorff {worst_h:.2e}"
        ),
    )
}

fn edge_fixture() -> Outcome {
    let scn = scenario("edge_classification.json");
    let s = scn.ego.s0;
    let pose = occsafe::geom::Pose2::new(scn.ego.path.point_at(s), scn.ego.path.heading_at(s));
    let p = perceive(&scn, pose, s, 0.0, true).unwrap();
    let mut got: Vec<(u32, RejectionReason)> = p
        .edges
        .iter()
        .map(|e| (e.lanelet_id.0, e.rejection_reason))
        .collect();
    got.sort();
    let mut want = vec![
        (20, RejectionReason::NoPathToEgo),
        (11, RejectionReason::LeadsOutsideFov),
        (11, RejectionReason::None),
        (10, RejectionReason::NotForemost),
        (14, RejectionReason::NotForemost),
    ];
    want.sort();
    let relevant: Vec<LaneletId> = p
        .edges
        .iter()
        .filter(|e| e.relevant)
        .map(|e| e.lanelet_id)
        .collect();
    let consistent = p
        .edges
        .iter()
        .all(|e| e.relevant == (e.rejection_reason == RejectionReason::None));
    outcome(
        got == want && relevant.len() == 1 && consistent,
        format!("edges {got:?}"),
    )
}

fn simulate(name: &str, aware: bool) -> (SimLog, Duration) {
    let scn = scenario(name);
    let start = Instant::now();
    let out = run(
        &scn,
        &RunFlags {
            occlusion_aware: aware,
            ..Default::default()
        },
    )
    .unwrap_or_else(|e| panic!("{name}: {e}"));
    (out.log, start.elapsed())
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_occsafe"))
}

fn scenarios() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let mut check = |ok: bool, note: String| {
        pass &= ok;
        notes.push(format!("{}{note}", if ok { "" } else { "!" }));
    };

    let status = cli()
        .args(["simulate", "--occlusion-aware", "false", "--scenario"])
        .arg(fixture("t_junction.json"))
        .output()
        .expect("run occsafe");
    check(
        status.status.code() == Some(2),
        format!("T unaware exit {:?}", status.status.code()),
    );

    let (unaware, d0) = simulate("t_junction.json", false);
    check(
        unaware.metrics.collision,
        format!("T unaware collision={}", unaware.metrics.collision),
    );

    let (aware, d1) = simulate("t_junction.json", true);
    check(
        !aware.metrics.collision && aware.metrics.min_speed_mps <= STOP_SPEED,
        format!(
            "T aware collision={} min v {:.2}",
            aware.metrics.collision, aware.metrics.min_speed_mps
        ),
    );

    let (clear, d2) = simulate("t_junction_clear.json", true);
    let scn = scenario("t_junction_clear.json");
    let merge_s = scn.ego.path.offset_of(LaneletId(3)).unwrap();
    let final_s = clear.records.last().unwrap().ego.s_m;
    check(
        !clear.metrics.collision
            && (clear.metrics.min_speed_mps - CLEAR_MIN_SPEED).abs() <= CLEAR_MIN_SPEED_TOL
            && final_s > merge_s,
        format!(
            "T clear min v {:.2} merged={}",
            clear.metrics.min_speed_mps,
            final_s > merge_s
        ),
    );

    let (crossing, d3) = simulate("x_junction_crossing.json", true);
    check(
        !crossing.metrics.collision,
        format!(
            "X crossing collision={} min v {:.2}",
            crossing.metrics.collision, crossing.metrics.min_speed_mps
        ),
    );
    let (turning, d4) = simulate("x_junction_turning.json", true);
    check(
        !turning.metrics.collision,
        format!(
            "X turning collision={} min v {:.2}",
            turning.metrics.collision, turning.metrics.min_speed_mps
        ),
    );
    check(
        turning.metrics.min_speed_mps <= crossing.metrics.min_speed_mps,
        "turning min v <= crossing min v".to_string(),
    );
    let slowest = [d0, d1, d2, d3, d4].into_iter().max().unwrap();
    check(
        slowest < SCENARIO_BUDGET,
        format!("slowest run {:.2} s", slowest.as_secs_f64()),
    );
    outcome(pass, notes.join("; "))
}

fn xi() -> Outcome {
    let dyn_ = DynamicsAssumptions::default();
    let a = xi_front(10.0, &dyn_, 0.2);
    let b = xi_front(
        14.0,
        &DynamicsAssumptions {
            v_abs_max: 15.4,
            ..dyn_
        },
        1.0,
    );
    outcome(
        (a - 2.2).abs() <= XI_TOL && (b - 15.302).abs() <= XI_TOL,
        format!("{a:.9} and {b:.9}"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let logs: Vec<PathBuf> = (0..2)
        .map(|i| dir.path().join(format!("run{i}.json")))
        .collect();
    for log in &logs {
        let st = cli()
            .args(["simulate", "--seed", "7", "--scenario"])
            .arg(fixture("x_junction_turning.json"))
            .arg("--log")
            .arg(log)
            .output()
            .expect("run occsafe");
        if st.status.code() != Some(0) {
            return outcome(false, format!("simulate exited {:?}", st.status.code()));
        }
    }
    let a = std::fs::read(&logs[0]).unwrap();
    let b = std::fs::read(&logs[1]).unwrap();
    outcome(
        !a.is_empty() && a == b,
        format!("{} bytes, identical={}", a.len(), a == b),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 M1 soundness", m1_soundness),
        ("2 speed-interval hexagon", hexagon),
        ("3 orientation fan", fan),
        ("4 collapsed-interval equivalence", collapsed_interval),
        ("5 edge classification fixture", edge_fixture),
        ("6 scenario outcomes", scenarios),
        ("7 xi_front values", xi),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        failed += usize::from(!o.pass);
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
