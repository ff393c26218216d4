use timing_games::equilibrium_lab::{indifference_alpha, verify_equilibrium, DeviationClass, Tolerance};
use timing_games::models::gbm::GbmPath;
use timing_games::models::jump::JumpPath;
use timing_games::models::*;
use timing_games::payoff_engine::{PathModel, Payoffs, Subgame};
use timing_games::sampling::stream_rng;
use timing_games::strategy_model::StoppingRule;
use timing_games::Error;

fn entry() -> GbmEntryParams {
    GbmEntryParams { r: 0.04, mu: 0.02, sigma: 0.2, cost: 1.0, m: 2.0, x0: 0.01 }
}

fn jump() -> JumpModelParams {
    JumpModelParams { r: 1.0, lambda: 1.0, c: 1.2 }
}

fn at(x0: f64) -> Subgame {
    Subgame { id: format!("x0={x0}"), x0, rule: StoppingRule::Start }
}

// ---------------------------------------------------------------------------
// GBM entry
// ---------------------------------------------------------------------------

#[test]
fn gbm_thresholds() {
    let cf = gbm_closed_forms(&entry()).unwrap();
    assert!((cf.beta1 - 2f64.sqrt()).abs() < 1e-10);
    assert!((cf.x_f - 0.02 * (2.0 + 2f64.sqrt())).abs() < 1e-12);
    assert!((cf.x_f - 0.0682842712).abs() < 1e-10);
    assert!((cf.x_p - 0.0210).abs() < 5e-5, "{}", cf.x_p);
    assert!((cf.x_p / cf.x_f - 0.3075).abs() < 5e-4);
    assert!((cf.leader(cf.x_p) - cf.follower(cf.x_p)).abs() < 1e-10);
}

#[test]
fn gbm_sign_pattern() {
    let cf = gbm_closed_forms(&entry()).unwrap();
    for k in 1..=100 {
        let x = cf.x_f * k as f64 / 101.0;
        let d = cf.leader(x) - cf.follower(x);
        if x < cf.x_p {
            assert!(d < 0.0, "x={x}");
            assert_eq!(cf.alpha(x), 0.0);
        } else if x > cf.x_p {
            assert!(d > 0.0, "x={x}");
            let a = cf.alpha(x);
            assert!(a > 0.0 && a < 1.0);
        }
        assert!(cf.follower(x) >= cf.simultaneous(x));
    }
    for x in [cf.x_f, 1.5 * cf.x_f, 10.0 * cf.x_f] {
        assert_eq!(cf.leader(x), cf.follower(x));
        assert!((cf.follower(x) - cf.simultaneous(x)).abs() < 1e-12);
        assert_eq!(cf.alpha(x), 1.0);
    }
}

#[test]
fn gbm_alpha_is_continuous_at_both_thresholds() {
    let cf = gbm_closed_forms(&entry()).unwrap();
    for e in [1e-2, 1e-3, 1e-4, 1e-6] {
        let lo = cf.alpha(cf.x_p * (1.0 + e));
        let hi = cf.alpha(cf.x_f * (1.0 - e));
        assert!(lo > 0.0 && lo < 2.0 * e, "{e}: {lo}");
        assert!(1.0 - hi < e, "{e}: {hi}");
    }
}

#[test]
fn gbm_alpha_is_the_indifference_value() {
    let cf = gbm_closed_forms(&entry()).unwrap();
    for k in 1..50 {
        let x = cf.x_p + (cf.x_f - cf.x_p) * k as f64 / 50.0;
        let q = indifference_alpha(cf.leader(x), cf.follower(x), cf.simultaneous(x)).unwrap();
        assert!((cf.alpha(x) - q).abs() < 1e-15);
    }
}

#[test]
fn gbm_parameter_errors() {
    let bad = [
        GbmEntryParams { r: 0.01, ..entry() },
        GbmEntryParams { m: 1.0, ..entry() },
        GbmEntryParams { sigma: -0.2, ..entry() },
        GbmEntryParams { cost: 0.0, ..entry() },
        GbmEntryParams { x0: 0.0, ..entry() },
    ];
    for p in bad {
        assert!(matches!(gbm_closed_forms(&p), Err(Error::Model(_))), "{p:?}");
    }
    let msg = gbm_closed_forms(&GbmEntryParams { sigma: -0.2, m: 0.5, ..entry() }).unwrap_err().to_string();
    assert!(msg.contains("sigma") && msg.contains("markup"), "{msg}");
    assert!(matches!(build_gbm_entry(&entry(), 100, 10.0), Err(Error::Config(_))));
    let p: Result<GbmEntryParams, _> =
        serde_json::from_str(r#"{"r":0.04,"mu":0.02,"sigma":0.2,"I":1,"m":2,"x0":0.01}"#);
    assert_eq!(p.unwrap(), entry());
}

#[test]
fn gbm_payoffs_are_discounted_closed_forms() {
    let (model, _) = build_gbm_entry(&entry(), 500, 200.0).unwrap();
    let cf = model.cf;
    let path: GbmPath = model.sample_path(0.03, &mut stream_rng(3, 0));
    for k in [0, 10, 250, 499] {
        let t = model.grid().time(k);
        let d = (-cf.params.r * t).exp();
        let x = path.x(k);
        assert!((path.l(0, k) - d * cf.leader(x)).abs() < 1e-12);
        assert!((path.f(1, k) - d * cf.follower(x)).abs() < 1e-12);
        assert!((path.m(0, k) - d * cf.simultaneous(x)).abs() < 1e-12);
        assert!(path.f(0, k) >= path.m(0, k));
    }
}

#[test]
fn gbm_equilibrium_at_a_low_anchor() {
    let (model, family) = build_gbm_entry(&entry(), 1000, 200.0).unwrap();
    let cf = model.cf;
    let class = DeviationClass::standard(model.deviation_rules(6));
    let x0 = 0.5 * cf.x_p;
    let cmp = cf.hitting_comparator(x0);
    let rep = verify_equilibrium(&model, &family, &at(x0), &class, 4000, 11, Tolerance::default(), Some([cmp, cmp]))
        .unwrap();
    assert!(rep.verdict, "{:#?}", rep.gaps);
    let c = rep.comparator.unwrap();
    assert!(c.pass, "{:?} vs {cmp}", rep.payoffs);
}

// ---------------------------------------------------------------------------
// Grab the dollar
// ---------------------------------------------------------------------------

#[test]
fn grab_intensities_make_the_opponent_indifferent() {
    for x in [0.1f64, 1.0, 3.7] {
        let d: f64 = 0.8;
        // player 2 indifferent against player 1's intensity
        let q1 = x / (1.0 + x);
        assert!((q1 * -d + (1.0 - q1) * x * d).abs() < 1e-15);
        assert!((indifference_alpha(x * d, 0.0, -d).unwrap() - q1).abs() < 1e-15);
        assert_eq!(indifference_alpha(d, 0.0, -d).unwrap(), 0.5);
    }
}

#[test]
fn grab_equilibrium_is_worth_nothing() {
    let p = GrabDollarParams { r: 0.1, x0: 1.5, mu: 0.0, sigma: 0.3 };
    let (model, family) = build_grab_dollar(&p, 200, 10.0).unwrap();
    let class = DeviationClass::standard(model.deviation_rules(4));
    let rep = verify_equilibrium(&model, &family, &at(p.x0), &class, 2000, 5, Tolerance::default(), Some([0.0, 0.0]))
        .unwrap();
    assert!(rep.verdict, "{:#?}", rep.gaps);
    for e in rep.payoffs {
        assert!(e.mean.abs() < 1e-12, "{e:?}");
    }
    assert!(build_grab_dollar(&GrabDollarParams { x0: -1.0, ..p }, 200, 10.0).is_err());
}

// ---------------------------------------------------------------------------
// Jump model
// ---------------------------------------------------------------------------

#[test]
fn jump_diagnostics_reference_values() {
    let d = jump_diagnostics(&jump()).unwrap();
    assert_eq!((d.a, d.b), (3.0, 0.5));
    assert!((d.wait_sum_bound - 3.35).abs() < 1e-12);
    assert!((d.lead_now_sum - 3.5).abs() < 1e-12);
    assert!(d.wait_rejected);
    assert!((d.submartingale_margin - 0.5).abs() < 1e-12);
    assert!((d.mixing_lhs - 1.0 / 1.3).abs() < 1e-12);
    assert!((d.mixing_rhs - 1.0).abs() < 1e-12);
    assert!(d.mixing_ruled_out);
    for c in [0.99, 1.5] {
        assert!(matches!(jump_diagnostics(&JumpModelParams { c, ..jump() }), Err(Error::Model(_))));
    }
}

#[test]
fn jump_payoffs_and_regimes() {
    let (model, _) = build_jump_model(&jump(), 400, 20.0).unwrap();
    let path: JumpPath = model.sample_path(0.0, &mut stream_rng(9, 0));
    let kt = path.jump_node;
    assert!(kt > 0);
    assert_eq!(path.l(0, 0), 2.5);
    assert_eq!(path.l(1, 0), 1.0);
    assert_eq!(path.l(1, kt), path.l(0, kt));
    for k in 0..path.payoff_nodes() {
        assert!(path.f(0, k) >= path.m(0, k));
        assert!((path.f(0, k) - path.m(0, k) - jump::SIMULTANEOUS_PENALTY).abs() < 1e-15);
    }
    let mean = jump::stopped_leader_mean(&jump(), 0, 0.0, 0.0);
    assert!((mean - 2.5).abs() < 1e-15);
}

#[test]
fn jump_spe_passes_and_waiting_fails() {
    let (model, _) = build_jump_model(&jump(), 1000, 20.0).unwrap();
    let class = DeviationClass::standard(model.deviation_rules(4));
    let spe = verify_equilibrium(&model, &JumpFamily::spe(), &at(0.0), &class, 2000, 1, Tolerance::default(), None)
        .unwrap();
    assert!(spe.verdict, "{:#?}", spe.gaps);
    assert_eq!(spe.payoffs[0].mean, 2.5);
    assert!((spe.payoffs[1].mean - 1.2).abs() < 1e-12);

    let wait =
        verify_equilibrium(&model, &JumpFamily::wait_until_t(), &at(0.0), &class, 2000, 1, Tolerance::default(), None)
            .unwrap();
    assert!(!wait.verdict);
    let sum = wait.payoffs[0].mean + wait.payoffs[1].mean;
    assert!(sum < 3.35 + 4.0 * (wait.payoffs[0].std_error + wait.payoffs[1].std_error));
    let immediate = wait.gaps.iter().find(|g| g.player == 1 && g.deviation == "immediate").unwrap();
    assert!(immediate.gap > 0.5, "{immediate:?}");
}
