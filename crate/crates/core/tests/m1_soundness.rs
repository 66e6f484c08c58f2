//! Monte-Carlo falsification of the acceleration-based occupancy.

use occsafe::geom::Point2;
use occsafe::occupancy::{m1_occupancy, DynamicsAssumptions, FanParams, IntervalState};
use occsafe::oracle::{sample_states, SampleConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-6;

fn random_state(rng: &mut ChaCha8Rng) -> IntervalState {
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

/// Counts sampled positions at times inside `[t_k, t_k1]` that fall outside the
/// occupancy of that interval.
fn violations(
    state: &IntervalState,
    dyn_: &DynamicsAssumptions,
    k: usize,
    dt: f64,
    n: usize,
    seed: u64,
) -> usize {
    let (t_k, t_k1) = (k as f64 * dt, (k + 1) as f64 * dt);
    let poly = m1_occupancy(state, dyn_, FanParams::default(), t_k, t_k1).unwrap();
    let times: Vec<f64> = (0..=4)
        .map(|i| t_k + (t_k1 - t_k) * i as f64 / 4.0)
        .collect();
    let cfg = SampleConfig {
        n_samples: n,
        seed,
        ..Default::default()
    };
    sample_states(state, dyn_, &times, &cfg, None)
        .iter()
        .flat_map(|tr| tr.positions.iter())
        .filter(|p| !poly.contains_point(**p, TOL))
        .count()
}

#[test]
fn fig3a_configuration_is_sound() {
    let st = IntervalState {
        pos_a: Point2::ORIGIN,
        pos_b: Point2::ORIGIN,
        heading_lo: 0.0,
        heading_hi: 0.0,
        v_lo: 6.0,
        v_hi: 10.0,
    };
    assert_eq!(
        violations(&st, &DynamicsAssumptions::default(), 1, 0.1, 10_000, 1),
        0
    );
}

#[test]
fn random_configurations_are_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dyn_ = DynamicsAssumptions::default();
    for c in 0..20 {
        let st = random_state(&mut rng);
        let k = rng.random_range(0..10);
        let bad = violations(&st, &dyn_, k, 0.1, 2_000, c);
        assert_eq!(bad, 0, "config {c}: {st:?} step {k}");
    }
}
