//! A timing game where player 2's leader payoff jumps at an exponential time
//! `T`, after which both players share player 1's increasing leader payoff.
//!
//! With `a = 2 + r/λ` and `b = r/(r+λ)`:
//! `L¹ = a - e^{-rt} b`, `L² = e^{-rt}` before `T` and `L¹` after,
//! `F¹ = F² = c e^{-rt}` and `M = F - 0.1`.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::equilibrium_lab::indifference_alpha;
use crate::payoff_engine::{PathModel, Payoffs};
use crate::strategy_model::{StatePath, StepStrategy, Strategy, StrategyFamily, StoppingRule, TimeGrid};
use crate::{Error, Result};

/// Gap between the follower and simultaneous payoffs.
pub const SIMULTANEOUS_PENALTY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpModelParams {
    pub r: f64,
    pub lambda: f64,
    pub c: f64,
}

impl JumpModelParams {
    pub fn a(&self) -> f64 {
        2.0 + self.r / self.lambda
    }

    pub fn b(&self) -> f64 {
        self.r / (self.r + self.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) || !(self.lambda > 0.0) {
            return Err(Error::Model(format!("need r > 0 and lambda > 0, got {} and {}", self.r, self.lambda)));
        }
        if !(self.c >= 1.0 && self.c < 1.0 + self.b()) {
            return Err(Error::Model(format!("c={} outside [1, {})", self.c, 1.0 + self.b())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpDiagnostics {
    pub a: f64,
    pub b: f64,
    /// Upper bound on the joint payoff when both wait for `T`.
    pub wait_sum_bound: f64,
    /// Joint payoff when player 1 leads at time 0.
    pub lead_now_sum: f64,
    pub wait_rejected: bool,
    /// `a - (1 + b) - r/λ`; nonnegative when `L²` is a submartingale.
    pub submartingale_margin: f64,
    /// `1 / (a - b - c)`.
    pub mixing_lhs: f64,
    /// `λ(r + λ) / (r² + λ²)`.
    pub mixing_rhs: f64,
    /// Continuous mixing before `T` would leave mass at `t = ∞`.
    pub mixing_ruled_out: bool,
}

pub fn jump_diagnostics(p: &JumpModelParams) -> Result<JumpDiagnostics> {
    p.validate()?;
    let (a, b, c, r, l) = (p.a(), p.b(), p.c, p.r, p.lambda);
    let wait_sum_bound = a - (b - c) * l / (r + l);
    let lead_now_sum = a - b + 1.0;
    let mixing_lhs = 1.0 / (a - b - c);
    let mixing_rhs = l * (r + l) / (r * r + l * l);
    Ok(JumpDiagnostics {
        a,
        b,
        wait_sum_bound,
        lead_now_sum,
        wait_rejected: wait_sum_bound < lead_now_sum,
        submartingale_margin: a - (1.0 + b) - r / l,
        mixing_lhs,
        mixing_rhs,
        mixing_ruled_out: mixing_lhs < mixing_rhs,
    })
}

/// `E[L^i_t 1{t<T} + F^i_T 1{t>=T} | T > s]` for player index `i`.
pub fn stopped_leader_mean(p: &JumpModelParams, i: usize, s: f64, t: f64) -> f64 {
    let (r, l) = (p.r, p.lambda);
    let survive = (-l * (t - s)).exp();
    let lead = if i == 0 { p.a() - (-r * t).exp() * p.b() } else { (-r * t).exp() };
    lead * survive + (-r * s).exp() * p.c * l / (r + l) * (1.0 - (-(r + l) * (t - s)).exp())
}

#[derive(Debug, Clone)]
pub struct JumpModel {
    pub params: JumpModelParams,
    grid: TimeGrid,
    disc: Arc<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct JumpPath {
    /// First node at or after `T`; the grid length if `T` is beyond it.
    pub jump_node: usize,
    a: f64,
    b: f64,
    c: f64,
    disc: Arc<Vec<f64>>,
}

impl Payoffs for JumpPath {
    fn payoff_nodes(&self) -> usize {
        self.disc.len()
    }
    fn l(&self, i: usize, k: usize) -> f64 {
        if i == 1 && k < self.jump_node {
            self.disc[k]
        } else {
            self.a - self.disc[k] * self.b
        }
    }
    fn f(&self, _i: usize, k: usize) -> f64 {
        self.c * self.disc[k]
    }
    fn m(&self, i: usize, k: usize) -> f64 {
        self.f(i, k) - SIMULTANEOUS_PENALTY
    }
    fn m_inf(&self, _i: usize) -> f64 {
        -SIMULTANEOUS_PENALTY
    }
}

impl StatePath for JumpPath {
    fn nodes(&self) -> usize {
        self.disc.len()
    }
    /// Regime indicator `1{t >= T}`.
    fn state(&self, k: usize) -> f64 {
        if k >= self.jump_node {
            1.0
        } else {
            0.0
        }
    }
}

impl JumpModel {
    fn sample_jump_node(&self, rng: &mut ChaCha8Rng) -> usize {
        let t: f64 = Exp::new(self.params.lambda).expect("validated rate").sample(rng);
        self.grid.index_at_or_after(t)
    }

    /// Path of `L²` on the grid.
    pub fn sample_l2(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let path = self.sample_path(0.0, rng);
        (0..self.grid.len()).map(|k| path.l(1, k)).collect()
    }

    /// Path of `L^i_t 1{t<T} + F^i_T 1{t>=T}` on the grid.
    pub fn sample_stopped_leader(&self, i: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let path = self.sample_path(0.0, rng);
        let kt = path.jump_node;
        (0..self.grid.len())
            .map(|k| if k < kt { path.l(i, k) } else { path.f(i, kt) })
            .collect()
    }

    /// `k` pure stopping times spread over the first part of the horizon.
    pub fn deviation_rules(&self, k: usize) -> Vec<(String, StoppingRule)> {
        let span = (4.0 / self.params.lambda).min(self.grid.time(self.grid.len() - 1));
        (0..k)
            .map(|i| {
                let t = span * (i + 1) as f64 / k as f64;
                (format!("time_{i:02}"), StoppingRule::AtTime(t))
            })
            .collect()
    }
}

impl PathModel for JumpModel {
    type Path = JumpPath;

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn sample_path(&self, _x0: f64, rng: &mut ChaCha8Rng) -> JumpPath {
        JumpPath {
            jump_node: self.sample_jump_node(rng),
            a: self.params.a(),
            b: self.params.b(),
            c: self.params.c,
            disc: self.disc.clone(),
        }
    }

    fn resolve_rule(&self, rule: &StoppingRule) -> Result<StoppingRule> {
        rule.resolve(|name| match name {
            "T" | "jump" => Ok(StoppingRule::StateAtLeast(0.5)),
            other => Err(Error::Model(format!("unknown region '{other}' for jump"))),
        })
    }
}

fn after_jump_alpha(path: &JumpPath, player: usize, k: usize) -> f64 {
    if k < path.jump_node {
        return 0.0;
    }
    let j = 1 - player;
    indifference_alpha(path.l(j, k), path.f(j, k), path.m(j, k)).unwrap_or(0.0)
}

/// Before `T` the `leader` stops at once and the other player waits for `T`;
/// from `T` on both preempt with indifference intensities. With `leader =
/// None` both wait for `T`.
#[derive(Debug, Clone)]
pub struct JumpFamily {
    pub leader: Option<usize>,
}

impl JumpFamily {
    pub fn spe() -> Self {
        Self { leader: Some(0) }
    }

    pub fn wait_until_t() -> Self {
        Self { leader: None }
    }
}

impl StrategyFamily<JumpPath> for JumpFamily {
    fn name(&self) -> &str {
        match self.leader {
            Some(_) => "jump_spe",
            None => "wait_until_t",
        }
    }
    fn strategy<'a>(&'a self, player: usize, path: &'a JumpPath, theta: usize) -> Box<dyn Strategy + 'a> {
        let n = path.payoff_nodes();
        let jump = if self.leader == Some(player) { theta } else { theta.max(path.jump_node) };
        Box::new(StepStrategy::new(n, jump, move |k| after_jump_alpha(path, player, k)))
    }
}

pub fn build_jump_model(p: &JumpModelParams, steps: usize, horizon: f64) -> Result<(JumpModel, JumpDiagnostics)> {
    let diag = jump_diagnostics(p)?;
    let grid = TimeGrid::uniform(steps, horizon)?;
    let disc = Arc::new(grid.times().iter().map(|t| (-p.r * t).exp()).collect());
    Ok((JumpModel { params: *p, grid, disc }, diag))
}
