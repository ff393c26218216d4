//! Extended mixed strategies on a discrete time grid.
//!
//! Grid semantics: the value of a step function at node `k` holds on
//! `[t_k, t_{k+1})`, and `ΔG(k) = G(k) - G(k-1)` with `G(-1) = 0`. For a grid
//! of `n` finite nodes the index `n` is the slot for `t = ∞`, where the
//! conventions `G(∞) = 1` and `α(∞) = 1` apply.
//!
//! A player is *active* at node `k` when `α(k) > 0`, or when `G(k) = 1`,
//! `α(k) = 0` and `α(k+1) > 0` at the next finite node. The second form is how
//! a grid encodes an intensity that becomes positive immediately to the right
//! of `t_k`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance for the time-consistency identity.
pub const CONSISTENCY_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Time grid and paths
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::Shape("time grid has no finite nodes".into()));
        }
        if t.iter().any(|v| !v.is_finite()) || t[0] < 0.0 {
            return Err(Error::Shape("time grid values must be finite and start at t >= 0".into()));
        }
        if let Some(k) = t.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Shape(format!("time grid not strictly increasing at node {}", k + 1)));
        }
        Ok(Self { t })
    }

    /// `steps + 1` equally spaced nodes on `[0, horizon]`.
    pub fn uniform(steps: usize, horizon: f64) -> Result<Self> {
        if steps == 0 || !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Shape(format!("bad uniform grid: steps={steps}, horizon={horizon}")));
        }
        let h = horizon / steps as f64;
        Self::new((0..=steps).map(|k| k as f64 * h).collect())
    }

    /// Number of finite nodes.
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Index of the `t = ∞` slot.
    pub fn inf(&self) -> usize {
        self.t.len()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t.get(k).copied().unwrap_or(f64::INFINITY)
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    /// First node with `t_k >= t` (up to rounding), or the ∞ slot.
    pub fn index_at_or_after(&self, t: f64) -> usize {
        let slack = 1e-12 * t.abs().max(1.0);
        self.t.partition_point(|&s| s < t - slack)
    }
}

/// Read access to the state variable of a sampled path.
pub trait StatePath {
    fn nodes(&self) -> usize;
    fn state(&self, k: usize) -> f64;

    /// First node at or after `from` with state `>= level`, or `nodes()`.
    fn first_at_least(&self, from: usize, level: f64) -> usize {
        (from..self.nodes()).find(|&k| self.state(k) >= level).unwrap_or(self.nodes())
    }

    /// First node at or after `from` with state `<= level`, or `nodes()`.
    fn first_at_most(&self, from: usize, level: f64) -> usize {
        (from..self.nodes()).find(|&k| self.state(k) <= level).unwrap_or(self.nodes())
    }
}

impl StatePath for [f64] {
    fn nodes(&self) -> usize {
        self.len()
    }
    fn state(&self, k: usize) -> f64 {
        self[k]
    }
}

impl StatePath for Vec<f64> {
    fn nodes(&self) -> usize {
        self.len()
    }
    fn state(&self, k: usize) -> f64 {
        self[k]
    }
}

// ---------------------------------------------------------------------------
// Stopping rules
// ---------------------------------------------------------------------------

/// First-hit rule on a path. Evaluated from a start index, it returns the first
/// node at or after the start where its predicate holds, or the ∞ slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingRule {
    Start,
    Never,
    AtIndex(usize),
    AtTime(f64),
    /// State `>= level`.
    StateAtLeast(f64),
    /// State `<= level`.
    StateAtMost(f64),
    /// Named region, resolved by the model into one of the other variants.
    AtHit(String),
}

impl StoppingRule {
    pub fn first_index<P: StatePath + ?Sized>(
        &self,
        grid: &TimeGrid,
        path: &P,
        from: usize,
    ) -> Result<usize> {
        let n = grid.len();
        if path.nodes() != n {
            return Err(Error::Shape(format!("path has {} nodes, grid has {n}", path.nodes())));
        }
        let from = from.min(n);
        Ok(match self {
            StoppingRule::Start => from,
            StoppingRule::Never => n,
            StoppingRule::AtIndex(i) => (*i).clamp(from, n),
            StoppingRule::AtTime(t) => grid.index_at_or_after(*t).max(from),
            StoppingRule::StateAtLeast(x) => path.first_at_least(from, *x),
            StoppingRule::StateAtMost(x) => path.first_at_most(from, *x),
            StoppingRule::AtHit(name) => {
                return Err(Error::Precondition(format!("region '{name}' was not resolved by the model")))
            }
        })
    }

    /// Replace a named region by a concrete rule.
    pub fn resolve(&self, regions: impl Fn(&str) -> Result<StoppingRule>) -> Result<StoppingRule> {
        match self {
            StoppingRule::AtHit(name) => regions(name),
            other => Ok(other.clone()),
        }
    }
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

/// One path of an extended mixed strategy `(G, α)`.
pub trait Strategy {
    /// Number of finite nodes.
    fn nodes(&self) -> usize;
    /// `G` at a finite node.
    fn g_node(&self, k: usize) -> f64;
    /// `α` at a finite node.
    fn alpha_node(&self, k: usize) -> f64;

    fn g(&self, k: usize) -> f64 {
        if k >= self.nodes() {
            1.0
        } else {
            self.g_node(k)
        }
    }

    fn alpha(&self, k: usize) -> f64 {
        if k >= self.nodes() {
            1.0
        } else {
            self.alpha_node(k)
        }
    }

    /// `G(k-)`, i.e. the value at the previous node.
    fn g_left(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.g(k - 1)
        }
    }

    fn jump(&self, k: usize) -> f64 {
        self.g(k) - self.g_left(k)
    }

    fn active(&self, k: usize) -> bool {
        self.alpha(k) > 0.0 || (k + 1 < self.nodes() && self.g(k) == 1.0 && self.alpha(k + 1) > 0.0)
    }

    /// First active node at or after `from`; the ∞ slot is always active.
    fn first_active(&self, from: usize) -> usize {
        let n = self.nodes();
        (from.min(n)..n).find(|&k| self.active(k)).unwrap_or(n)
    }

    /// First node at or after `from` where `G` jumps, or the ∞ slot.
    fn next_jump(&self, from: usize) -> usize {
        let n = self.nodes();
        (from.min(n)..n).find(|&k| self.jump(k) != 0.0).unwrap_or(n)
    }
}

/// Vector-backed strategy path over the finite nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPath {
    pub g: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl StrategyPath {
    pub fn new(g: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        if g.len() != alpha.len() {
            return Err(Error::Shape(format!("G has {} nodes, alpha has {}", g.len(), alpha.len())));
        }
        Ok(Self { g, alpha })
    }

    /// Materialize any strategy on its finite nodes.
    pub fn from_strategy(s: &dyn Strategy) -> Self {
        let n = s.nodes();
        Self {
            g: (0..n).map(|k| s.g(k)).collect(),
            alpha: (0..n).map(|k| s.alpha(k)).collect(),
        }
    }
}

impl Strategy for StrategyPath {
    fn nodes(&self) -> usize {
        self.g.len()
    }
    fn g_node(&self, k: usize) -> f64 {
        self.g[k]
    }
    fn alpha_node(&self, k: usize) -> f64 {
        self.alpha[k]
    }
}

/// `G = 1{k >= jump}` with an intensity rule that is read only from `jump` on.
pub struct StepStrategy<A> {
    n: usize,
    jump: usize,
    alpha: A,
}

impl<A: Fn(usize) -> f64> StepStrategy<A> {
    pub fn new(n: usize, jump: usize, alpha: A) -> Self {
        Self { n, jump: jump.min(n), alpha }
    }

    pub fn jump_node(&self) -> usize {
        self.jump
    }
}

impl<A: Fn(usize) -> f64> Strategy for StepStrategy<A> {
    fn nodes(&self) -> usize {
        self.n
    }
    fn g_node(&self, k: usize) -> f64 {
        if k >= self.jump {
            1.0
        } else {
            0.0
        }
    }
    fn alpha_node(&self, k: usize) -> f64 {
        if k >= self.jump {
            (self.alpha)(k)
        } else {
            0.0
        }
    }
    fn first_active(&self, from: usize) -> usize {
        let start = from.max(self.jump).min(self.n);
        (start..self.n).find(|&k| self.active(k)).unwrap_or(self.n)
    }
    fn next_jump(&self, from: usize) -> usize {
        if from <= self.jump {
            self.jump
        } else {
            self.n
        }
    }
}

/// Pure stop at `tau`: `G = α = 1{k >= tau}`.
pub fn pure(n: usize, tau: usize) -> StepStrategy<fn(usize) -> f64> {
    StepStrategy::new(n, tau, |_| 1.0)
}

/// Never stop on the finite grid.
pub fn never(n: usize) -> StepStrategy<fn(usize) -> f64> {
    pure(n, n)
}

/// A strategy for every path of a fixture together with its subgame starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedStrategy {
    pub theta: Vec<usize>,
    pub paths: Vec<StrategyPath>,
}

impl ExtendedStrategy {
    fn check_shape(&self) -> Result<usize> {
        if self.theta.len() != self.paths.len() {
            return Err(Error::Shape(format!(
                "{} subgame starts for {} paths",
                self.theta.len(),
                self.paths.len()
            )));
        }
        let n = self.paths.first().map_or(0, |p| p.g.len());
        for (i, p) in self.paths.iter().enumerate() {
            if p.g.len() != n || p.alpha.len() != n {
                return Err(Error::Shape(format!("path {i} does not have {n} nodes")));
            }
        }
        Ok(n)
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// `G` or `α` outside `[0, 1]`.
    Range,
    /// `G` decreases.
    Monotonicity,
    /// `G > 0` before the subgame start.
    BeforeStart,
    /// `α > 0` where `G < 1`.
    Support,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub path: usize,
    pub node: usize,
    pub clause: Clause,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the feasibility clauses on one path.
pub fn validate_path(s: &dyn Strategy, theta: usize, path: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |node, clause| out.push(Violation { path, node, clause });
    for k in 0..s.nodes() {
        let (g, a) = (s.g(k), s.alpha(k));
        if !(0.0..=1.0).contains(&g) || !(0.0..=1.0).contains(&a) {
            push(k, Clause::Range);
        }
        if g < s.g_left(k) {
            push(k, Clause::Monotonicity);
        }
        if k < theta && g != 0.0 {
            push(k, Clause::BeforeStart);
        }
        if a > 0.0 && g != 1.0 {
            push(k, Clause::Support);
        }
    }
    out
}

pub fn validate_strategy(s: &ExtendedStrategy) -> Result<ValidationReport> {
    s.check_shape()?;
    let violations = s
        .paths
        .iter()
        .zip(&s.theta)
        .enumerate()
        .flat_map(|(i, (p, &th))| validate_path(p, th, i))
        .collect();
    Ok(ValidationReport { violations })
}

// ---------------------------------------------------------------------------
// Time consistency
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyField {
    G,
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyViolation {
    pub path: usize,
    pub node: usize,
    pub field: ConsistencyField,
    pub expected: f64,
    pub found: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// First violation per path.
    pub violations: Vec<ConsistencyViolation>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compare the strategy of the subgame at `ϑ` with the one at a later `ϑ'`:
/// `G^ϑ(t) = G^ϑ(ϑ'-) + (1 - G^ϑ(ϑ'-)) G^ϑ'(t)` and `α^ϑ = α^ϑ'` for `t >= ϑ'`.
pub fn check_time_consistency(
    early: &ExtendedStrategy,
    late: &ExtendedStrategy,
) -> Result<ConsistencyReport> {
    let n = early.check_shape()?;
    if late.check_shape()? != n || late.paths.len() != early.paths.len() {
        return Err(Error::Shape("strategies cover different paths or grids".into()));
    }
    let mut report = ConsistencyReport::default();
    for (p, (a, b)) in early.paths.iter().zip(&late.paths).enumerate() {
        let (th, th2) = (early.theta[p], late.theta[p]);
        if th > th2 {
            return Err(Error::Precondition(format!(
                "path {p}: first start {th} is after second start {th2}"
            )));
        }
        if let Some(v) = first_inconsistency(a, b, th2, p) {
            report.violations.push(v);
        }
    }
    Ok(report)
}

fn first_inconsistency(
    a: &dyn Strategy,
    b: &dyn Strategy,
    start: usize,
    path: usize,
) -> Option<ConsistencyViolation> {
    let prior = a.g_left(start);
    for k in start..a.nodes() {
        let expected = prior + (1.0 - prior) * b.g(k);
        let found = a.g(k);
        if (found - expected).abs() > CONSISTENCY_TOL {
            return Some(ConsistencyViolation { path, node: k, field: ConsistencyField::G, expected, found });
        }
        let (x, y) = (b.alpha(k), a.alpha(k));
        if (x - y).abs() > CONSISTENCY_TOL {
            return Some(ConsistencyViolation { path, node: k, field: ConsistencyField::Alpha, expected: x, found: y });
        }
    }
    None
}

/// Embed per-path stopping indices as pure strategies `G = α = 1{t >= τ}`.
pub fn pure_strategy(n: usize, tau: &[usize], theta: &[usize]) -> Result<ExtendedStrategy> {
    if tau.len() != theta.len() {
        return Err(Error::Shape(format!("{} stopping indices for {} starts", tau.len(), theta.len())));
    }
    let mut paths = Vec::with_capacity(tau.len());
    for (p, (&t, &th)) in tau.iter().zip(theta).enumerate() {
        if t < th {
            return Err(Error::Precondition(format!("path {p}: stop at {t} precedes start {th}")));
        }
        paths.push(StrategyPath::from_strategy(&pure(n, t)));
    }
    Ok(ExtendedStrategy { theta: theta.to_vec(), paths })
}

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

/// Strategies of both players for every subgame start on a path.
pub trait StrategyFamily<P: ?Sized>: Sync {
    fn name(&self) -> &str;
    fn strategy<'a>(&'a self, player: usize, path: &'a P, theta: usize) -> Box<dyn Strategy + 'a>;
}

/// Materialize one player's family member on a set of paths.
pub fn realize<P: StatePath, F: StrategyFamily<P> + ?Sized>(
    family: &F,
    player: usize,
    grid: &TimeGrid,
    paths: &[P],
    rule: &StoppingRule,
) -> Result<ExtendedStrategy> {
    let mut theta = Vec::with_capacity(paths.len());
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let th = rule.first_index(grid, path, 0)?;
        out.push(StrategyPath::from_strategy(family.strategy(player, path, th).as_ref()));
        theta.push(th);
    }
    Ok(ExtendedStrategy { theta, paths: out })
}

/// Time consistency of a family between two nested subgame starts.
pub fn check_family_consistency<P: StatePath, F: StrategyFamily<P> + ?Sized>(
    family: &F,
    player: usize,
    grid: &TimeGrid,
    paths: &[P],
    theta: &StoppingRule,
    theta_prime: &StoppingRule,
) -> Result<ConsistencyReport> {
    let early = realize(family, player, grid, paths, theta)?;
    let late = realize(family, player, grid, paths, theta_prime)?;
    check_time_consistency(&early, &late)
}

// ---------------------------------------------------------------------------
// Fixture form
// ---------------------------------------------------------------------------

/// JSON fixture: `{grid, paths[], G[][], alpha[][], theta_rule}` over finite nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyFixture {
    pub grid: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub theta_rule: StoppingRule,
}

impl StrategyFixture {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fixture serializes")
    }

    pub fn to_strategy(&self) -> Result<(TimeGrid, ExtendedStrategy)> {
        let grid = TimeGrid::new(self.grid.clone())?;
        if self.g.len() != self.paths.len() || self.alpha.len() != self.paths.len() {
            return Err(Error::Shape("G, alpha and paths differ in length".into()));
        }
        let mut theta = Vec::with_capacity(self.paths.len());
        let mut paths = Vec::with_capacity(self.paths.len());
        for (i, x) in self.paths.iter().enumerate() {
            theta.push(self.theta_rule.first_index(&grid, x, 0)?);
            let p = StrategyPath::new(self.g[i].clone(), self.alpha[i].clone())?;
            if p.g.len() != grid.len() {
                return Err(Error::Shape(format!("path {i}: strategy and grid lengths differ")));
            }
            paths.push(p);
        }
        Ok((grid, ExtendedStrategy { theta, paths }))
    }
}
