use rand::Rng;
use timing_games::models::gbm::{discount_horizon, follower_lattice, follower_lattice_drift};
use timing_games::models::{build_jump_model, gbm_closed_forms, GbmEntryParams, JumpModelParams};
use timing_games::stopping_solver::*;
use timing_games::Error;

fn entry_params() -> GbmEntryParams {
    GbmEntryParams { r: 0.04, mu: 0.02, sigma: 0.2, cost: 1.0, m: 2.0, x0: 0.01 }
}

// ---------------------------------------------------------------------------
// Snell envelope
// ---------------------------------------------------------------------------

#[test]
fn zero_payoff_stops_everywhere() {
    let lat = MarkovLattice::binomial_gbm(1.0, 0.0, 0.3, 1.0, 20).unwrap();
    let sol = snell_envelope(&lat, &|_, _| 0.0, &|_, _| 0.0).unwrap();
    assert!(sol.value.iter().flatten().all(|&v| v == 0.0));
    assert!(sol.stop.iter().flatten().all(|&s| s));
    assert_eq!(sol.first_stop(&[0, 0, 1]), Some(0));
}

#[test]
fn one_period_comparison() {
    let lat = MarkovLattice::binomial_gbm(1.0, 0.0, 0.3, 1.0, 1).unwrap();
    let sol = snell_envelope(&lat, &|t, _| if t == 0.0 { 5.0 } else { 0.0 }, &|_, _| 3.0).unwrap();
    assert_eq!(sol.value[0][0], 5.0);
    assert!(sol.stop[0][0]);

    let sol = snell_envelope(&lat, &|t, _| if t == 0.0 { 2.0 } else { 0.0 }, &|_, _| 3.0).unwrap();
    assert!((sol.value[0][0] - 3.0).abs() < 1e-15);
    assert!(!sol.stop[0][0]);
}

#[test]
fn general_transitions_are_checked() {
    let lat = MarkovLattice {
        times: vec![0.0, 1.0],
        states: vec![vec![0.0], vec![1.0, 2.0]],
        transitions: Transitions::General(vec![vec![vec![(0, 0.5), (1, 0.4)]]]),
    };
    assert!(matches!(snell_envelope(&lat, &|_, _| 0.0, &|_, _| 0.0), Err(Error::Lattice(_))));
    let lat = MarkovLattice { transitions: Transitions::General(vec![vec![vec![(0, 0.25), (1, 0.75)]]]), ..lat };
    let sol = snell_envelope(&lat, &|_, _| 0.0, &|_, x| x).unwrap();
    assert!((sol.value[0][0] - 1.75).abs() < 1e-15);
    assert!(MarkovLattice::binomial_gbm(1.0, 0.0, 0.0, 1.0, 10).is_err());
}

#[test]
fn follower_value_at_half_threshold() {
    let cf = gbm_closed_forms(&entry_params()).unwrap();
    let x = 0.5 * cf.x_f;
    let (lat, sol) = follower_lattice(&cf, x, 2000, discount_horizon(cf.params.r)).unwrap();
    let exact = cf.follower(x);
    assert!((exact - 0.9058).abs() < 1e-3, "{exact}");
    let rel = (sol.value[0][0] - exact).abs() / exact;
    assert!(rel < 0.01, "lattice {} vs {exact}", sol.value[0][0]);
    assert!(sol.envelope_defect(&lat) < 1e-12);
}

/// Off the stop region the value is its own one-step expectation.
#[test]
fn follower_value_is_a_martingale_while_waiting() {
    let cf = gbm_closed_forms(&entry_params()).unwrap();
    let (lat, sol) = follower_lattice(&cf, 0.03, 600, discount_horizon(cf.params.r)).unwrap();
    let mut checked = 0;
    for k in 0..lat.slices() - 1 {
        for j in 0..lat.states[k].len() {
            if !sol.stop[k][j] {
                let c = lat.expect(k, j, &sol.value[k + 1]);
                assert!((sol.value[k][j] - c).abs() <= 1e-12 * sol.value[k][j].abs().max(1.0));
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
    let (below, above) = follower_lattice_drift(&cf, &lat);
    assert!(below < 1e-3, "{below}");
    assert!(above < 0.0, "{above}");
}

// ---------------------------------------------------------------------------
// Hitting times
// ---------------------------------------------------------------------------

#[test]
fn hitting_time_examples() {
    let x = vec![1.0, 2.0, 3.0];
    assert_eq!(hitting_time(&x, |_, _| true, 1), 1);
    assert_eq!(hitting_time(&x, |_, v| v > 10.0, 0), 3);
    assert_eq!(hitting_time(&x, |k, _| k >= 7, 0), 3);
}

#[test]
fn path_crossing_the_follower_threshold_at_step_137() {
    let x_f = gbm_closed_forms(&entry_params()).unwrap().x_f;
    let path: Vec<f64> = (0..400)
        .map(|k| {
            let k = k as f64;
            x_f * (0.002 * (k - 137.0) + 0.0005 * (1.0 + k.sin())).exp()
        })
        .collect();
    assert_eq!(hitting_time(&path, |_, x| x >= x_f, 0), 137);
    assert_eq!(hitting_time(&path, |_, x| x >= x_f, 137), 137);
    assert_eq!(hitting_time(&path, |_, x| x >= x_f, 138), 138);
}

#[test]
fn hitting_time_never_precedes_start() {
    let mut r = timing_games::sampling::stream_rng(12, 0);
    for _ in 0..200 {
        let path: Vec<f64> = (0..50).map(|_| r.random_range(0.0..1.0)).collect();
        let level = r.random_range(0.0..1.0);
        let s1 = r.random_range(0..50);
        let s2 = r.random_range(s1..=50);
        let (t1, t2) = (hitting_time(&path, |_, x| x >= level, s1), hitting_time(&path, |_, x| x >= level, s2));
        assert!(t2 >= s2 && t1 >= s1 && t1 <= t2);
    }
}

// ---------------------------------------------------------------------------
// Drift
// ---------------------------------------------------------------------------

#[test]
fn deterministic_increasing_leader_payoff_is_a_submartingale() {
    let (a, b, r) = (3.0, 0.5, 1.0);
    let sample = |_: &mut rand_chacha::ChaCha8Rng| (0..100).map(|k| a - (-r * k as f64 * 0.05).exp() * b).collect();
    let res = drift_classify(sample, &[(0, 1), (10, 40), (50, 99)], 100, 0, 4.0).unwrap();
    for d in res {
        assert_eq!(d.verdict, Drift::Submartingale);
        assert!(d.strict);
    }
}

#[test]
fn symmetric_random_walk_is_a_martingale() {
    let sample = |rng: &mut rand_chacha::ChaCha8Rng| {
        let mut x = 0.0;
        (0..60)
            .map(|_| {
                let v = x;
                x += if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                v
            })
            .collect()
    };
    let res = drift_classify(sample, &[(10, 30), (20, 59)], 20_000, 8, 4.0).unwrap();
    for d in &res {
        assert_eq!(d.verdict, Drift::Martingale, "{d:?}");
        assert!(d.buckets.len() >= 5);
    }
}

#[test]
fn jump_model_drifts() {
    let p = JumpModelParams { r: 1.0, lambda: 1.0, c: 1.2 };
    let (model, _) = build_jump_model(&p, 2000, 20.0).unwrap();
    let pairs = [(0, 10), (0, 100), (0, 500)];
    let l2 = drift_classify(|rng| model.sample_l2(rng), &pairs, 20_000, 1, 4.0).unwrap();
    for d in &l2 {
        assert_eq!(d.verdict, Drift::Submartingale, "{d:?}");
        assert!(d.strict);
    }
    for i in 0..2 {
        let stopped = drift_classify(|rng| model.sample_stopped_leader(i, rng), &pairs, 20_000, 2, 4.0).unwrap();
        for d in &stopped {
            assert_eq!(d.verdict, Drift::Supermartingale, "player {i}: {d:?}");
            assert!(d.strict);
        }
    }
}

#[test]
fn drift_preconditions() {
    let sample = |_: &mut rand_chacha::ChaCha8Rng| vec![0.0; 5];
    assert!(matches!(drift_classify(sample, &[(0, 1)], 99, 0, 4.0), Err(Error::Precondition(_))));
    assert!(matches!(drift_classify(sample, &[(2, 2)], 100, 0, 4.0), Err(Error::Precondition(_))));
    assert!(matches!(drift_classify(sample, &[(0, 9)], 100, 0, 4.0), Err(Error::Shape(_))));
}
