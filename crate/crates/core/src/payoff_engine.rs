//! Subgame payoffs path by path and their Monte Carlo aggregation.
//!
//! Mass that ends the game strictly before `τ̂` is integrated against the jumps
//! of both `G`s; the mass still in play at `τ̂` is split by the outcome
//! probabilities of [`crate::outcome_kernel`].

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::outcome_kernel::{resolve_trusted, LimitParams, OutcomeDistribution};
use crate::sampling::{mean_se, par_units};
use crate::strategy_model::{
    validate_path, StatePath, Strategy, StrategyFamily, StoppingRule, TimeGrid,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Payoff processes
// ---------------------------------------------------------------------------

/// Leader, follower and simultaneous payoffs of both players on one path,
/// discounted to time 0. Players are indexed 0 and 1.
pub trait Payoffs {
    fn payoff_nodes(&self) -> usize;
    fn l(&self, i: usize, k: usize) -> f64;
    fn f(&self, i: usize, k: usize) -> f64;
    fn m(&self, i: usize, k: usize) -> f64;
    /// `M_∞`; the follower value at `∞` is the same number.
    fn m_inf(&self, i: usize) -> f64;

    /// `(L, F, M)` at a node, with the `∞` slot mapped to `M_∞`.
    fn lfm(&self, i: usize, k: usize) -> (f64, f64, f64) {
        if k >= self.payoff_nodes() {
            let v = self.m_inf(i);
            (v, v, v)
        } else {
            (self.l(i, k), self.f(i, k), self.m(i, k))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameProcesses {
    pub l: [Vec<f64>; 2],
    pub f: [Vec<f64>; 2],
    pub m: [Vec<f64>; 2],
    pub m_inf: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `(player, node)` where `F < M`.
    pub follower_below_simultaneous: Vec<(usize, usize)>,
    /// Largest absolute payoff over all processes and nodes.
    pub sup_abs: f64,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.follower_below_simultaneous.is_empty() && self.sup_abs.is_finite()
    }
}

impl GameProcesses {
    pub fn new(l: [Vec<f64>; 2], f: [Vec<f64>; 2], m: [Vec<f64>; 2], m_inf: [f64; 2]) -> Result<Self> {
        let n = l[0].len();
        if [&l[1], &f[0], &f[1], &m[0], &m[1]].iter().any(|v| v.len() != n) {
            return Err(Error::Shape("payoff processes differ in length".into()));
        }
        Ok(Self { l, f, m, m_inf })
    }

    /// Same processes for both players.
    pub fn symmetric(l: Vec<f64>, f: Vec<f64>, m: Vec<f64>, m_inf: f64) -> Result<Self> {
        Self::new([l.clone(), l], [f.clone(), f], [m.clone(), m], [m_inf, m_inf])
    }

    /// `F >= M` at every node, and a finite bound on all values.
    pub fn check_assumptions(&self) -> AssumptionReport {
        let mut bad = Vec::new();
        let mut sup = self.m_inf[0].abs().max(self.m_inf[1].abs());
        for i in 0..2 {
            for k in 0..self.l[i].len() {
                if self.f[i][k] < self.m[i][k] {
                    bad.push((i, k));
                }
                for v in [self.l[i][k], self.f[i][k], self.m[i][k]] {
                    sup = if v.is_finite() { sup.max(v.abs()) } else { f64::INFINITY };
                }
            }
        }
        AssumptionReport { follower_below_simultaneous: bad, sup_abs: sup }
    }
}

impl Payoffs for GameProcesses {
    fn payoff_nodes(&self) -> usize {
        self.l[0].len()
    }
    fn l(&self, i: usize, k: usize) -> f64 {
        self.l[i][k]
    }
    fn f(&self, i: usize, k: usize) -> f64 {
        self.f[i][k]
    }
    fn m(&self, i: usize, k: usize) -> f64 {
        self.m[i][k]
    }
    fn m_inf(&self, i: usize) -> f64 {
        self.m_inf[i]
    }
}

// ---------------------------------------------------------------------------
// Path payoff
// ---------------------------------------------------------------------------

/// Payoff of player `i` in the subgame at node `theta` when `i` plays `s_i`
/// and the opponent plays `s_j`.
pub fn path_payoff(
    gp: &dyn Payoffs,
    s_i: &dyn Strategy,
    s_j: &dyn Strategy,
    i: usize,
    theta: usize,
) -> Result<f64> {
    let n = gp.payoff_nodes();
    if s_i.nodes() != n || s_j.nodes() != n {
        return Err(Error::Shape(format!(
            "strategies on {} and {} nodes, processes on {n}",
            s_i.nodes(),
            s_j.nodes()
        )));
    }
    for s in [s_i, s_j] {
        if let Some(v) = validate_path(s, theta, 0).first() {
            return Err(Error::Validation(format!("{:?} at node {}", v.clause, v.node)));
        }
    }
    path_payoff_trusted(gp, s_i, s_j, i, theta, &LimitParams::default()).map(|(v, _)| v)
}

/// [`path_payoff`] without validation, also returning the outcome at `τ̂`.
pub fn path_payoff_trusted(
    gp: &dyn Payoffs,
    s_i: &dyn Strategy,
    s_j: &dyn Strategy,
    i: usize,
    theta: usize,
    params: &LimitParams,
) -> Result<(f64, OutcomeDistribution)> {
    let out = resolve_trusted(s_i, s_j, theta, params)?;
    let tau = out.tau_hat;
    let mut v = 0.0;
    let mut k = s_i.next_jump(0).min(s_j.next_jump(0));
    while k < tau {
        let (dgi, dgj) = (s_i.jump(k), s_j.jump(k));
        if dgi != 0.0 {
            v += (1.0 - s_j.g(k)) * gp.l(i, k) * dgi;
        }
        if dgj != 0.0 {
            v += (1.0 - s_i.g(k)) * gp.f(i, k) * dgj;
        }
        if dgi != 0.0 && dgj != 0.0 {
            v += dgi * dgj * gp.m(i, k);
        }
        k = s_i.next_jump(k + 1).min(s_j.next_jump(k + 1));
    }
    let (l, f, m) = gp.lfm(i, tau);
    v += out.lambda_l_i * l + out.lambda_l_j * f + out.lambda_m * m;
    Ok((v, out))
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl PayoffEstimate {
    pub fn from_samples(xs: &[f64], seed: u64) -> Self {
        let (mean, std_error) = mean_se(xs);
        Self { mean, std_error, n_paths: xs.len(), seed }
    }
}

/// A Markov model that samples payoff paths from a given initial state.
pub trait PathModel: Sync {
    type Path: Payoffs + StatePath + Send;

    fn grid(&self) -> &TimeGrid;
    fn sample_path(&self, x0: f64, rng: &mut ChaCha8Rng) -> Self::Path;

    /// Map named regions in a rule to concrete state predicates.
    fn resolve_rule(&self, rule: &StoppingRule) -> Result<StoppingRule> {
        rule.resolve(|name| Err(Error::Model(format!("unknown region '{name}'"))))
    }
}

/// A subgame: initial state of the simulated paths and the rule for `ϑ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgame {
    pub id: String,
    pub x0: f64,
    pub rule: StoppingRule,
}

/// Run `f` on `n_paths` sampled paths with their subgame start; results are in
/// path order and independent of the number of worker threads.
pub fn map_paths<M, R, F>(model: &M, subgame: &Subgame, n_paths: usize, seed: u64, f: F) -> Result<Vec<R>>
where
    M: PathModel,
    R: Send,
    F: Fn(&M::Path, usize) -> Result<R> + Sync,
{
    if n_paths == 0 {
        return Err(Error::Precondition("at least one path is required".into()));
    }
    let rule = model.resolve_rule(&subgame.rule)?;
    let grid = model.grid();
    par_units(n_paths, seed, |_, rng| {
        let path = model.sample_path(subgame.x0, rng);
        if path.payoff_nodes() != grid.len() {
            return Err(Error::Shape("sampled path does not match the model grid".into()));
        }
        let theta = rule.first_index(grid, &path, 0)?;
        f(&path, theta)
    })
    .into_iter()
    .collect()
}

/// Expected payoff of `player` when player 0 follows `families[0]` and player 1
/// follows `families[1]`.
pub fn expected_payoff<M: PathModel>(
    model: &M,
    families: [&dyn StrategyFamily<M::Path>; 2],
    player: usize,
    subgame: &Subgame,
    n_paths: usize,
    seed: u64,
) -> Result<PayoffEstimate> {
    let params = LimitParams::default();
    let xs = map_paths(model, subgame, n_paths, seed, |path, theta| {
        let s0 = families[0].strategy(0, path, theta);
        let s1 = families[1].strategy(1, path, theta);
        let (si, sj) = if player == 0 { (&s0, &s1) } else { (&s1, &s0) };
        path_payoff_trusted(path, si.as_ref(), sj.as_ref(), player, theta, &params).map(|r| r.0)
    })?;
    Ok(PayoffEstimate::from_samples(&xs, seed))
}

/// A deterministic model: every sample is the same path.
#[derive(Debug, Clone)]
pub struct FixedModel {
    pub grid: TimeGrid,
    pub path: FixedPath,
}

#[derive(Debug, Clone)]
pub struct FixedPath {
    pub processes: GameProcesses,
    pub state: Vec<f64>,
}

impl FixedModel {
    /// The state variable is calendar time.
    pub fn new(grid: TimeGrid, processes: GameProcesses) -> Result<Self> {
        if processes.payoff_nodes() != grid.len() {
            return Err(Error::Shape("processes and grid differ in length".into()));
        }
        let state = grid.times().to_vec();
        Ok(Self { grid, path: FixedPath { processes, state } })
    }
}

impl Payoffs for FixedPath {
    fn payoff_nodes(&self) -> usize {
        self.processes.payoff_nodes()
    }
    fn l(&self, i: usize, k: usize) -> f64 {
        self.processes.l[i][k]
    }
    fn f(&self, i: usize, k: usize) -> f64 {
        self.processes.f[i][k]
    }
    fn m(&self, i: usize, k: usize) -> f64 {
        self.processes.m[i][k]
    }
    fn m_inf(&self, i: usize) -> f64 {
        self.processes.m_inf[i]
    }
}

impl StatePath for FixedPath {
    fn nodes(&self) -> usize {
        self.state.len()
    }
    fn state(&self, k: usize) -> f64 {
        self.state[k]
    }
}

impl PathModel for FixedModel {
    type Path = FixedPath;
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    fn sample_path(&self, _x0: f64, _rng: &mut ChaCha8Rng) -> FixedPath {
        self.path.clone()
    }
}

// ---------------------------------------------------------------------------
// Change of variable
// ---------------------------------------------------------------------------

/// `∫_[a,b) |L| dG` computed twice: by summing over the jumps of `G`, and by
/// integrating `|L(τ^G(x))|` over the levels `x` of `G`, with
/// `τ^G(x) = inf{t | G_t >= x}`.
pub fn stieltjes_changevar_oracle(l: &[f64], g: &[f64], a: usize, b: usize) -> Result<(f64, f64)> {
    if l.len() != g.len() {
        return Err(Error::Shape(format!("L has {} nodes, G has {}", l.len(), g.len())));
    }
    let mut prev = 0.0;
    for (k, &v) in g.iter().enumerate() {
        if !(v >= prev) {
            return Err(Error::Precondition(format!("G decreases at node {k}")));
        }
        prev = v;
    }
    let b = b.min(g.len());
    let direct: f64 = (a..b)
        .map(|k| l[k].abs() * (g[k] - if k == 0 { 0.0 } else { g[k - 1] }))
        .sum();

    let mut levels: Vec<f64> = std::iter::once(0.0).chain(g.iter().copied()).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut inverse = 0.0;
    for w in levels.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let tau = g.partition_point(|&v| v < mid);
        if (a..b).contains(&tau) {
            inverse += l[tau].abs() * (w[1] - w[0]);
        }
    }
    Ok((direct, inverse))
}
