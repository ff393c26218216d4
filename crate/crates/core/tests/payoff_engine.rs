mod common;

use common::{path, random_processes, random_strategy, rng};
use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
use rand::Rng;
use timing_games::cli_reporting::random_changevar_case;
use timing_games::models::gbm::GbmPath;
use timing_games::models::{build_gbm_entry, GbmEntryParams};
use timing_games::payoff_engine::*;
use timing_games::strategy_model::{never, pure, StepStrategy, StoppingRule, Strategy, StrategyFamily, TimeGrid};
use timing_games::Error;

fn three_node() -> GameProcesses {
    let l = vec![9.0, 9.0, 5.0];
    let f = vec![1.0, 2.0, 7.0];
    let m = vec![0.0, 0.0, -1.0];
    GameProcesses::symmetric(l, f, m, -3.0).unwrap()
}

/// Payoff of two pure stopping indices: lead, follow, or stop together.
fn pure_payoff(gp: &GameProcesses, i: usize, ti: usize, tj: usize) -> f64 {
    let n = gp.payoff_nodes();
    if ti == n && tj == n {
        gp.m_inf(i)
    } else if ti < tj {
        gp.l(i, ti)
    } else if tj < ti {
        gp.f(i, tj)
    } else {
        gp.m(i, ti)
    }
}

// ---------------------------------------------------------------------------
// Path payoff
// ---------------------------------------------------------------------------

#[test]
fn pure_strategies_reduce_to_three_branches() {
    let gp = three_node();
    let n = 3;
    assert_eq!(path_payoff(&gp, &pure(n, 0), &pure(n, 2), 0, 0).unwrap(), 9.0);
    assert_eq!(path_payoff(&gp, &pure(n, 2), &pure(n, 1), 0, 0).unwrap(), 2.0);
    assert_eq!(path_payoff(&gp, &pure(n, 2), &pure(n, 2), 0, 0).unwrap(), -1.0);
    assert_eq!(path_payoff(&gp, &never(n), &never(n), 0, 0).unwrap(), -3.0);
    assert_eq!(path_payoff(&gp, &never(n), &pure(n, 0), 0, 0).unwrap(), 1.0);
}

/// `j` stops with mass 0.1 and 0.2 at the first two nodes, `i` stops for sure
/// at the third: the outcome tree gives `0.1 F(0) + 0.2 F(1) + 0.7 L(2)`.
#[test]
fn three_node_outcome_tree() {
    let gp = three_node();
    let si = path(&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]);
    let sj = path(&[0.1, 0.3, 0.3], &[0.0, 0.0, 0.0]);
    let v = path_payoff(&gp, &si, &sj, 0, 0).unwrap();
    let tree = 0.1 * 1.0 + 0.2 * 2.0 + 0.7 * 5.0;
    assert!((v - tree).abs() < 1e-12, "{v} vs {tree}");
    assert!((v - 4.0).abs() < 1e-12);

    // from j's side: it leads at the first two nodes and follows at the third
    let w = path_payoff(&gp, &sj, &si, 1, 0).unwrap();
    assert!((w - (0.1 * 9.0 + 0.2 * 9.0 + 0.7 * 7.0)).abs() < 1e-12, "{w}");
}

#[test]
fn simultaneous_jumps_before_tau_hat_pay_m() {
    let gp = three_node();
    let si = path(&[0.5, 0.5, 1.0], &[0.0, 0.0, 1.0]);
    let sj = path(&[0.5, 0.5, 1.0], &[0.0, 0.0, 1.0]);
    // node 0: i alone 0.25 L, j alone 0.25 F, both 0.25 M; node 2: both stop
    let v = path_payoff(&gp, &si, &sj, 0, 0).unwrap();
    let want = 0.25 * 9.0 + 0.25 * 1.0 + 0.25 * 0.0 + 0.25 * -1.0;
    assert!((v - want).abs() < 1e-12, "{v}");
}

#[test]
fn payoff_input_errors() {
    let gp = three_node();
    assert!(matches!(path_payoff(&gp, &pure(4, 0), &pure(4, 1), 0, 0), Err(Error::Shape(_))));
    let bad = path(&[0.0, 0.5, 1.0], &[0.0, 0.5, 1.0]);
    assert!(matches!(path_payoff(&gp, &bad, &pure(3, 1), 0, 0), Err(Error::Validation(_))));
    assert!(GameProcesses::new([vec![0.0], vec![0.0]], [vec![0.0], vec![]], [vec![0.0], vec![0.0]], [0.0; 2]).is_err());
}

#[test]
fn assumption_check_flags_follower_below_simultaneous() {
    let gp = GameProcesses::symmetric(vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.5], 0.0).unwrap();
    let rep = gp.check_assumptions();
    assert!(!rep.holds());
    assert_eq!(rep.follower_below_simultaneous, vec![(0, 1), (1, 1)]);
    assert!(three_node().check_assumptions().holds());
}

/// Against a forced stop of the opponent with intensity `q`, the better of
/// stopping now and never stopping is `max{F, qM + (1-q)L}`.
#[test]
fn best_response_at_a_forced_end() {
    let mut r = rng(17);
    for _ in 0..200 {
        let n = 6;
        let theta = r.random_range(0..n);
        let gp = random_processes(&mut r, n);
        let q = r.random_range(0.0..1.0);
        let sj = StepStrategy::new(n, theta, move |_| q);
        let now = path_payoff(&gp, &pure(n, theta), &sj, 0, theta).unwrap();
        let wait = path_payoff(&gp, &never(n), &sj, 0, theta).unwrap();
        let (l, f, m) = gp.lfm(0, theta);
        let want = f.max(q * m + (1.0 - q) * l);
        assert!((now.max(wait) - want).abs() < 1e-12);
        assert!((wait - f).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn pure_pairs_match_the_three_branch_formula(seed in any::<u64>(), n in 1usize..12, a in 0usize..13, b in 0usize..13) {
        let mut r = rng(seed);
        let gp = random_processes(&mut r, n);
        let (ti, tj) = (a.min(n), b.min(n));
        for i in 0..2 {
            let (s, o) = if i == 0 { (ti, tj) } else { (tj, ti) };
            let v = path_payoff(&gp, &pure(n, s), &pure(n, o), i, 0).unwrap();
            prop_assert_eq!(v, pure_payoff(&gp, i, s, o));
        }
    }

    #[test]
    fn payoff_is_bounded_by_the_processes(seed in any::<u64>(), n in 1usize..30) {
        let mut r = rng(seed);
        let gp = random_processes(&mut r, n);
        let si = random_strategy(&mut r, n, 0);
        let sj = random_strategy(&mut r, n, 0);
        let mut bound: f64 = gp.m_inf(0).abs();
        for k in 0..n {
            bound = bound.max(gp.l(0, k).abs() + gp.f(0, k).abs() + gp.m(0, k).abs());
        }
        let v = path_payoff(&gp, &si, &sj, 0, 0).unwrap();
        prop_assert!(v.abs() <= bound + 1e-12, "{} > {}", v, bound);
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

struct Never;

impl StrategyFamily<GbmPath> for Never {
    fn name(&self) -> &str {
        "never"
    }
    fn strategy<'a>(&'a self, _player: usize, path: &'a GbmPath, _theta: usize) -> Box<dyn Strategy + 'a> {
        Box::new(never(path.log_x.len()))
    }
}

struct Fixed(usize);

impl StrategyFamily<FixedPath> for Fixed {
    fn name(&self) -> &str {
        "fixed"
    }
    fn strategy<'a>(&'a self, _player: usize, path: &'a FixedPath, theta: usize) -> Box<dyn Strategy + 'a> {
        Box::new(pure(path.state.len(), self.0.max(theta)))
    }
}

#[test]
fn deterministic_model_has_zero_standard_error() {
    let grid = TimeGrid::uniform(2, 2.0).unwrap();
    let model = FixedModel::new(grid, three_node()).unwrap();
    let sg = Subgame { id: "start".into(), x0: 0.0, rule: StoppingRule::Start };
    let est = expected_payoff(&model, [&Fixed(0), &Fixed(1)], 0, &sg, 64, 1).unwrap();
    assert_eq!(est.mean, 9.0);
    assert_eq!(est.std_error, 0.0);
    assert_eq!(est.n_paths, 64);
    let est = expected_payoff(&model, [&Fixed(0), &Fixed(1)], 1, &sg, 8, 1).unwrap();
    assert_eq!(est.mean, 1.0);
    assert!(expected_payoff(&model, [&Fixed(0), &Fixed(1)], 0, &sg, 0, 1).is_err());
}

#[test]
fn nobody_stops_in_the_gbm_model() {
    let p = GbmEntryParams { r: 0.04, mu: 0.02, sigma: 0.2, cost: 1.0, m: 2.0, x0: 0.01 };
    let (model, _) = build_gbm_entry(&p, 500, 200.0).unwrap();
    let sg = Subgame { id: "start".into(), x0: 0.03, rule: StoppingRule::Start };
    let est = expected_payoff(&model, [&Never, &Never], 0, &sg, 500, 4).unwrap();
    assert_eq!((est.mean, est.std_error), (0.0, 0.0));
}

#[test]
fn estimates_are_reproducible() {
    let p = GbmEntryParams { r: 0.04, mu: 0.02, sigma: 0.2, cost: 1.0, m: 2.0, x0: 0.01 };
    let (model, family) = build_gbm_entry(&p, 500, 200.0).unwrap();
    let sg = Subgame { id: "start".into(), x0: 0.015, rule: StoppingRule::Start };
    let a = expected_payoff(&model, [&family, &family], 0, &sg, 2000, 99).unwrap();
    let b = expected_payoff(&model, [&family, &family], 0, &sg, 2000, 99).unwrap();
    assert_eq!(a, b);
    let c = expected_payoff(&model, [&family, &family], 0, &sg, 2000, 100).unwrap();
    assert_ne!(a.mean, c.mean);
}

// ---------------------------------------------------------------------------
// Change of variable
// ---------------------------------------------------------------------------

#[test]
fn unit_mass_change_of_variable() {
    let l = [3.0, -2.0, 5.0, 1.0];
    let g = [0.0, 1.0, 1.0, 1.0];
    assert_eq!(stieltjes_changevar_oracle(&l, &g, 0, 4).unwrap(), (2.0, 2.0));
    assert_eq!(stieltjes_changevar_oracle(&l, &g, 2, 4).unwrap(), (0.0, 0.0));
}

#[test]
fn two_half_steps_change_of_variable() {
    let l = [3.0, -2.0, 5.0, 1.0];
    let g = [0.0, 0.5, 0.5, 1.0];
    let (d, i) = stieltjes_changevar_oracle(&l, &g, 0, 4).unwrap();
    assert_eq!((d, i), (1.5, 1.5));
    assert!(matches!(stieltjes_changevar_oracle(&l, &[0.0, 0.5, 0.4, 1.0], 0, 4), Err(Error::Precondition(_))));
    assert!(matches!(stieltjes_changevar_oracle(&l, &g[..3], 0, 3), Err(Error::Shape(_))));
}

#[test]
fn randomized_change_of_variable() {
    let mut worst: f64 = 0.0;
    for seed in 0..300 {
        let (l, g, a, b) = random_changevar_case(seed);
        let (d, i) = stieltjes_changevar_oracle(&l, &g, a, b).unwrap();
        worst = worst.max((d - i).abs());
    }
    assert!(worst < 1e-9, "{worst:e}");
}
