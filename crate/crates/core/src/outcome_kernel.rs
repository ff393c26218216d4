//! Stage outcome measures and the resolution of who stops first.
//!
//! `μ_L(x, y)` is the probability that a player stopping with probability `x`
//! per round stops strictly first in an infinitely repeated stage game against
//! an opponent stopping with probability `y`; `μ_M` is the probability that
//! both stop in the same round.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sampling::par_units;
use crate::strategy_model::{validate_path, Strategy};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Stage measures
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageProbabilities {
    pub a_i: f64,
    pub a_j: f64,
}

impl StageProbabilities {
    pub fn new(a_i: f64, a_j: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a_i) || !(0.0..=1.0).contains(&a_j) {
            return Err(Error::Domain(format!("stage probabilities ({a_i}, {a_j}) outside [0,1]")));
        }
        if a_i == 0.0 && a_j == 0.0 {
            return Err(Error::Domain("μ_L has no continuous extension at the origin".into()));
        }
        Ok(Self { a_i, a_j })
    }
}

/// `x(1-y) / (x + y - xy)`; undefined at the origin.
pub fn mu_l(x: f64, y: f64) -> f64 {
    x * (1.0 - y) / (x + y - x * y)
}

/// `μ_F(x, y) = μ_L(y, x)`.
pub fn mu_f(x: f64, y: f64) -> f64 {
    mu_l(y, x)
}

/// `xy / (x + y - xy)`, extended by 0 at the origin.
pub fn mu_m(x: f64, y: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        0.0
    } else {
        x * y / (x + y - x * y)
    }
}

/// `(μ_L(a_i, a_j), μ_L(a_j, a_i), μ_M(a_i, a_j))`.
pub fn stage_outcome_measures(a_i: f64, a_j: f64) -> Result<(f64, f64, f64)> {
    let p = StageProbabilities::new(a_i, a_j)?;
    Ok((mu_l(p.a_i, p.a_j), mu_l(p.a_j, p.a_i), mu_m(p.a_i, p.a_j)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StageMode {
    /// Sum of the geometric series over rounds.
    ClosedForm,
    /// Empirical frequencies over independent repeated games.
    Simulate { trials: u64, seed: u64 },
}

const TRIALS_PER_STREAM: u64 = 1 << 16;

/// Probabilities that `i` stops first, `j` stops first, or both stop in the
/// same round of the repeated stage game.
pub fn repeated_stage_oracle(a_i: f64, a_j: f64, mode: StageMode) -> Result<(f64, f64, f64)> {
    let p = StageProbabilities::new(a_i, a_j)?;
    match mode {
        StageMode::ClosedForm => Ok(stage_series(p.a_i, p.a_j)),
        StageMode::Simulate { trials, seed } => {
            if trials == 0 {
                return Err(Error::Precondition("simulation needs at least one trial".into()));
            }
            let chunks = trials.div_ceil(TRIALS_PER_STREAM) as usize;
            let counts = par_units(chunks, seed, |c, rng| {
                let lo = c as u64 * TRIALS_PER_STREAM;
                let m = (trials - lo).min(TRIALS_PER_STREAM);
                let mut tally = [0u64; 3];
                for _ in 0..m {
                    loop {
                        let si = rng.random::<f64>() < p.a_i;
                        let sj = rng.random::<f64>() < p.a_j;
                        match (si, sj) {
                            (true, false) => tally[0] += 1,
                            (false, true) => tally[1] += 1,
                            (true, true) => tally[2] += 1,
                            (false, false) => continue,
                        }
                        break;
                    }
                }
                tally
            });
            let mut tot = [0u64; 3];
            for t in counts {
                for (a, b) in tot.iter_mut().zip(t) {
                    *a += b;
                }
            }
            let n = trials as f64;
            Ok((tot[0] as f64 / n, tot[1] as f64 / n, tot[2] as f64 / n))
        }
    }
}

fn stage_series(a_i: f64, a_j: f64) -> (f64, f64, f64) {
    let q = (1.0 - a_i) * (1.0 - a_j);
    let mut weight = 0.0f64;
    let mut term = 1.0f64;
    let mut rounds = 0u32;
    while term > 1e-17 * weight.max(1.0) {
        weight += term;
        term *= q;
        rounds += 1;
        if rounds == 10_000_000 {
            // geometric tail
            weight += term / (1.0 - q);
            break;
        }
    }
    (weight * a_i * (1.0 - a_j), weight * a_j * (1.0 - a_i), weight * a_i * a_j)
}

// ---------------------------------------------------------------------------
// Right limits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitParams {
    /// Width of the first window, in grid steps.
    pub window0: usize,
    pub shrink: f64,
    pub tol: f64,
    /// Windows with fewer samples of positive intensity are below grid
    /// resolution and end the sweep.
    pub min_samples: usize,
}

impl Default for LimitParams {
    fn default() -> Self {
        Self { window0: 64, shrink: 0.5, tol: 1e-6, min_samples: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RightLimitEstimate {
    pub liminf_est: f64,
    pub limsup_est: f64,
    pub converged: bool,
    pub window_count: usize,
}

struct Sweep {
    /// `[min, max]` of `μ_L(α_i, α_j)` followed by `[min, max]` of `μ_L(α_j, α_i)`.
    ext: [f64; 4],
    windows: usize,
}

fn sweep(
    n: usize,
    tau: usize,
    params: &LimitParams,
    alpha: impl Fn(usize) -> (f64, f64),
) -> Result<Sweep> {
    if params.window0 < 2 || !(params.shrink > 0.0 && params.shrink < 1.0) {
        return Err(Error::Precondition(format!(
            "window sweep needs window0 > 1 step and 0 < shrink < 1, got {} and {}",
            params.window0, params.shrink
        )));
    }
    let extrema = |w: usize| {
        let mut e = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        let mut count = 0;
        for k in tau + 1..=(tau + w).min(n.saturating_sub(1)) {
            let (x, y) = alpha(k);
            if x + y > 0.0 {
                count += 1;
                let (u, v) = (mu_l(x, y), mu_l(y, x));
                e = [e[0].min(u), e[1].max(u), e[2].min(v), e[3].max(v)];
            }
        }
        (count > 0).then_some((e, count))
    };
    let mut prev: Option<[f64; 4]> = None;
    let mut width = params.window0 as f64;
    let mut windows = 0;
    loop {
        let w = (width.ceil() as usize).max(1);
        let cur = extrema(w);
        match (prev, cur) {
            // below grid resolution: keep the last resolved window
            (Some(_), Some((_, count))) if count < params.min_samples => break,
            (Some(p), Some((c, _))) if p.iter().zip(&c).all(|(a, b)| (a - b).abs() <= params.tol) => {
                return Ok(Sweep { ext: c, windows: windows + 1 });
            }
            _ => {}
        }
        windows += 1;
        if let Some((c, _)) = cur {
            prev = Some(c);
        }
        if w == 1 {
            break;
        }
        width *= params.shrink;
    }
    prev.map(|ext| Sweep { ext, windows }).ok_or(Error::EmptyLimit(tau))
}

/// Lower and upper limits of `μ_L(α_i(t), α_j(t))` as `t` decreases to the
/// node `tau_hat`, over samples with `α_i + α_j > 0`, estimated on windows
/// `(τ̂, τ̂ + window0·shrink^k]` that shrink until two successive windows
/// agree within `tol` or hold fewer than `min_samples` usable samples.
pub fn right_limit_estimate(
    alpha_i: &[f64],
    alpha_j: &[f64],
    tau_hat: usize,
    params: &LimitParams,
) -> Result<RightLimitEstimate> {
    if alpha_i.len() != alpha_j.len() {
        return Err(Error::Shape("intensity paths differ in length".into()));
    }
    let s = sweep(alpha_i.len(), tau_hat, params, |k| (alpha_i[k], alpha_j[k]))?;
    Ok(RightLimitEstimate {
        liminf_est: s.ext[0],
        limsup_est: s.ext[1],
        converged: true,
        window_count: s.windows,
    })
}

// ---------------------------------------------------------------------------
// Outcome resolution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeCase {
    /// Only `i` is active at `τ̂`.
    IOnly,
    /// Only `j` is active at `τ̂`.
    JOnly,
    /// Both active, and some `α = 1` or both `α > 0`.
    Joint,
    /// Both active with `max α < 1` and `min α = 0`: right limits decide.
    Limit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    /// Node of `τ̂`; the grid length stands for `∞`.
    pub tau_hat: usize,
    pub case: OutcomeCase,
    pub lambda_l_i: f64,
    pub lambda_l_j: f64,
    pub lambda_m: f64,
    /// `(1 - G_i(τ̂-))(1 - G_j(τ̂-))`, the mass still in play at `τ̂`.
    pub reach: f64,
    /// Part of `reach` not assigned to any of the three outcomes.
    pub residual: f64,
    /// Right-limit sweep, in the limit case.
    pub limit: Option<RightLimitEstimate>,
}

impl OutcomeDistribution {
    /// The same outcome seen from the other player.
    pub fn swapped(&self) -> Self {
        let case = match self.case {
            OutcomeCase::IOnly => OutcomeCase::JOnly,
            OutcomeCase::JOnly => OutcomeCase::IOnly,
            c => c,
        };
        Self { case, lambda_l_i: self.lambda_l_j, lambda_l_j: self.lambda_l_i, ..*self }
    }
}

/// Outcome probabilities at `τ̂`, the first node at or after `theta` where a
/// player is active. Both strategies are validated first.
pub fn resolve_outcome(
    s_i: &dyn Strategy,
    s_j: &dyn Strategy,
    theta: usize,
) -> Result<OutcomeDistribution> {
    resolve_outcome_with(s_i, s_j, theta, &LimitParams::default())
}

pub fn resolve_outcome_with(
    s_i: &dyn Strategy,
    s_j: &dyn Strategy,
    theta: usize,
    params: &LimitParams,
) -> Result<OutcomeDistribution> {
    if s_i.nodes() != s_j.nodes() {
        return Err(Error::Shape(format!("strategies on {} and {} nodes", s_i.nodes(), s_j.nodes())));
    }
    for (who, s) in [("i", s_i), ("j", s_j)] {
        if let Some(v) = validate_path(s, theta, 0).first() {
            return Err(Error::Validation(format!("player {who}: {:?} at node {}", v.clause, v.node)));
        }
    }
    resolve_trusted(s_i, s_j, theta, params)
}

/// Resolution without validation, for strategies already known to be valid.
pub fn resolve_trusted(
    s_i: &dyn Strategy,
    s_j: &dyn Strategy,
    theta: usize,
    params: &LimitParams,
) -> Result<OutcomeDistribution> {
    let n = s_i.nodes();
    let ti = s_i.first_active(theta);
    let tj = s_j.first_active(theta);
    let tau = ti.min(tj);
    let (gi, gj) = (s_i.g_left(tau), s_j.g_left(tau));
    let reach = (1.0 - gi) * (1.0 - gj);
    let (ai, aj) = (s_i.alpha(tau), s_j.alpha(tau));

    let mut limit = None;
    let (case, li, lj, lm) = if tau < tj {
        let li = (1.0 - gi) * (1.0 - s_j.g(tau));
        let lm = (1.0 - gi) * ai * s_j.jump(tau);
        // The remaining mass is a jump of j met by i's intensity below one.
        let lj = (1.0 - gi) * (1.0 - ai) * s_j.jump(tau);
        (OutcomeCase::IOnly, li, lj, lm)
    } else if tau < ti {
        let lj = (1.0 - gj) * (1.0 - s_i.g(tau));
        let lm = (1.0 - gj) * aj * s_i.jump(tau);
        let li = (1.0 - gj) * (1.0 - aj) * s_i.jump(tau);
        (OutcomeCase::JOnly, li, lj, lm)
    } else if ai.max(aj) == 1.0 || ai.min(aj) > 0.0 {
        (OutcomeCase::Joint, reach * mu_l(ai, aj), reach * mu_l(aj, ai), reach * mu_m(ai, aj))
    } else {
        let ext = match sweep(n, tau, params, |k| (s_i.alpha(k), s_j.alpha(k))) {
            Ok(s) => {
                limit = Some(RightLimitEstimate {
                    liminf_est: s.ext[0],
                    limsup_est: s.ext[1],
                    converged: true,
                    window_count: s.windows,
                });
                s.ext
            }
            Err(Error::EmptyLimit(_)) => {
                let (x, y) = (s_i.alpha(tau + 1), s_j.alpha(tau + 1));
                let (u, v) = if x + y > 0.0 { (mu_l(x, y), mu_l(y, x)) } else { (0.0, 0.0) };
                limit = Some(RightLimitEstimate { liminf_est: u, limsup_est: u, converged: false, window_count: 0 });
                [u, u, v, v]
            }
            Err(e) => return Err(e),
        };
        let li = reach * (1.0 - aj) * (ai + (1.0 - ai) * 0.5 * (ext[0] + ext[1]));
        let lj = reach * (1.0 - ai) * (aj + (1.0 - aj) * 0.5 * (ext[2] + ext[3]));
        (OutcomeCase::Limit, li, lj, (reach - (li + lj)).max(0.0))
    };
    Ok(OutcomeDistribution {
        tau_hat: tau,
        case,
        lambda_l_i: li,
        lambda_l_j: lj,
        lambda_m: lm,
        reach,
        residual: reach - (li + lj) - lm,
        limit,
    })
}
