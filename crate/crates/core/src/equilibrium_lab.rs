//! Preemption equilibria and their verification against a deviation class.
//!
//! The preemption region is where both players strictly prefer leading,
//! `L^i > F^i`. On a grid its entry time `τ^P(k)` is the first node at or after
//! `k` inside the region, or a node on its closure (`min_i (L^i - F^i) = 0`)
//! followed directly by a node inside.

use serde::{Deserialize, Serialize};

use crate::outcome_kernel::{LimitParams, OutcomeDistribution};
use crate::payoff_engine::{map_paths, path_payoff_trusted, Payoffs, PathModel, PayoffEstimate, Subgame};
use crate::sampling::mean_se;
use crate::strategy_model::{
    never, pure, StatePath, StepStrategy, Strategy, StrategyFamily, StoppingRule, TimeGrid,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Indifference and the preemption intensities
// ---------------------------------------------------------------------------

/// Opponent intensity `(L - F) / (L - M)` that leaves a player indifferent
/// between stopping and waiting.
pub fn indifference_alpha(l: f64, f: f64, m: f64) -> Result<f64> {
    if !(l > f) {
        return Err(Error::Domain(format!("no first-mover advantage: L={l}, F={f}")));
    }
    if !(l > m) {
        return Err(Error::Domain(format!("degenerate indifference: L={l}, M={m}")));
    }
    Ok((l - f) / (l - m))
}

fn advantage(gp: &dyn Payoffs, k: usize) -> [f64; 2] {
    [gp.l(0, k) - gp.f(0, k), gp.l(1, k) - gp.f(1, k)]
}

pub fn in_preemption_region(gp: &dyn Payoffs, k: usize) -> bool {
    let d = advantage(gp, k);
    d[0] > 0.0 && d[1] > 0.0
}

/// `τ^P(from)`, or the `∞` slot.
pub fn preemption_time(gp: &dyn Payoffs, from: usize) -> usize {
    let n = gp.payoff_nodes();
    let mut inside_next = from < n && in_preemption_region(gp, from);
    for k in from..n {
        let inside = inside_next;
        inside_next = k + 1 < n && in_preemption_region(gp, k + 1);
        if inside || (inside_next && advantage(gp, k).iter().cloned().fold(f64::INFINITY, f64::min) == 0.0) {
            return k;
        }
    }
    n
}

/// Intensities of both players at node `k`: 1 for the player with a strict
/// advantage (or total indifference) at the entry node when the opponent has
/// none, otherwise the opponent's indifference value inside the region and 0
/// outside.
pub fn build_preemption_alpha(gp: &dyn Payoffs, k: usize) -> Result<[f64; 2]> {
    let d = advantage(gp, k);
    let entry = preemption_time(gp, k) == k;
    let mut out = [0.0; 2];
    for i in 0..2 {
        let j = 1 - i;
        let (lj, fj, mj) = (gp.l(j, k), gp.f(j, k), gp.m(j, k));
        out[i] = if entry && d[j] == 0.0 && (d[i] > 0.0 || fj == mj) {
            1.0
        } else if d[0] > 0.0 && d[1] > 0.0 {
            indifference_alpha(lj, fj, mj)?
        } else {
            0.0
        };
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

/// `G^ϑ = 1{t >= τ^P(ϑ)}` with the preemption intensities.
#[derive(Debug, Clone, Default)]
pub struct PreemptionFamily;

impl<P: Payoffs + Sync> StrategyFamily<P> for PreemptionFamily {
    fn name(&self) -> &str {
        "submartingale_preemption"
    }
    fn strategy<'a>(&'a self, player: usize, path: &'a P, theta: usize) -> Box<dyn Strategy + 'a> {
        let tau = preemption_time(path, theta);
        Box::new(StepStrategy::new(path.payoff_nodes(), tau, move |k| {
            build_preemption_alpha(path, k).map_or(0.0, |a| a[player])
        }))
    }
}

// ---------------------------------------------------------------------------
// Deviations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deviation {
    /// Pure stop at the first hit of a rule from the subgame start.
    Rule { id: String, rule: StoppingRule },
    Never,
    /// Stop at the subgame start with intensity 1.
    Immediate,
    /// Stop at the subgame start with the intensity that makes the opponent
    /// indifferent (0 where the opponent has no first-mover advantage).
    ImmediateIndifference,
}

impl Deviation {
    pub fn id(&self) -> String {
        match self {
            Deviation::Rule { id, .. } => id.clone(),
            Deviation::Never => "never".into(),
            Deviation::Immediate => "immediate".into(),
            Deviation::ImmediateIndifference => "immediate_indifference".into(),
        }
    }

    pub fn strategy<'a, P: Payoffs + StatePath>(
        &self,
        player: usize,
        grid: &TimeGrid,
        path: &'a P,
        theta: usize,
    ) -> Result<Box<dyn Strategy + 'a>> {
        let n = grid.len();
        Ok(match self {
            Deviation::Rule { rule, .. } => Box::new(pure(n, rule.first_index(grid, path, theta)?)),
            Deviation::Never => Box::new(never(n)),
            Deviation::Immediate => Box::new(pure(n, theta)),
            Deviation::ImmediateIndifference => {
                let j = 1 - player;
                let q = if theta < n {
                    indifference_alpha(path.l(j, theta), path.f(j, theta), path.m(j, theta)).unwrap_or(0.0)
                } else {
                    0.0
                };
                Box::new(StepStrategy::new(n, theta, move |_| q))
            }
        })
    }
}

/// The finite set of alternatives each player is tested against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationClass {
    pub deviations: Vec<Deviation>,
}

impl DeviationClass {
    /// Model rules plus never, immediate and immediate-with-indifference.
    pub fn standard(rules: Vec<(String, StoppingRule)>) -> Self {
        let mut deviations: Vec<Deviation> =
            rules.into_iter().map(|(id, rule)| Deviation::Rule { id, rule }).collect();
        deviations.extend([Deviation::Never, Deviation::Immediate, Deviation::ImmediateIndifference]);
        Self { deviations }
    }

    pub fn ids(&self) -> Vec<String> {
        self.deviations.iter().map(Deviation::id).collect()
    }
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub n_se: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs_tol: 1e-6, n_se: 4.0 }
    }
}

impl Tolerance {
    pub fn allows(&self, excess: f64, se: f64) -> bool {
        excess <= self.abs_tol.max(self.n_se * se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationGap {
    /// Player number, 1 or 2.
    pub player: usize,
    pub deviation: String,
    /// Deviation payoff minus equilibrium payoff.
    pub gap: f64,
    pub std_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorCheck {
    pub value: [f64; 2],
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub subgame: String,
    pub family: String,
    pub n_paths: usize,
    pub seed: u64,
    pub payoffs: [PayoffEstimate; 2],
    pub comparator: Option<ComparatorCheck>,
    pub deviation_class: Vec<String>,
    pub gaps: Vec<DeviationGap>,
    pub tolerance: Tolerance,
    pub verdict: bool,
    /// Equilibrium outcome at `τ̂` on the first sampled paths.
    pub outcomes: Vec<OutcomeDistribution>,
}

/// How many sampled outcomes a report keeps.
pub const REPORTED_OUTCOMES: usize = 20;

/// Equilibrium payoffs of both players.
pub fn equilibrium_payoff<M: PathModel>(
    model: &M,
    family: &dyn StrategyFamily<M::Path>,
    subgame: &Subgame,
    n_paths: usize,
    seed: u64,
) -> Result<[PayoffEstimate; 2]> {
    let params = LimitParams::default();
    let rows = map_paths(model, subgame, n_paths, seed, |path, theta| {
        let s = [family.strategy(0, path, theta), family.strategy(1, path, theta)];
        let v0 = path_payoff_trusted(path, s[0].as_ref(), s[1].as_ref(), 0, theta, &params)?.0;
        let v1 = path_payoff_trusted(path, s[1].as_ref(), s[0].as_ref(), 1, theta, &params)?.0;
        Ok([v0, v1])
    })?;
    let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<_>>();
    Ok([PayoffEstimate::from_samples(&col(0), seed), PayoffEstimate::from_samples(&col(1), seed)])
}

/// Payoff gaps of every deviation for each player against the opponent's
/// equilibrium strategy, on common sampled paths.
pub fn verify_equilibrium<M: PathModel>(
    model: &M,
    family: &dyn StrategyFamily<M::Path>,
    subgame: &Subgame,
    deviations: &DeviationClass,
    n_paths: usize,
    seed: u64,
    tol: Tolerance,
    comparator: Option<[f64; 2]>,
) -> Result<EquilibriumReport> {
    if deviations.deviations.is_empty() {
        return Err(Error::Precondition("empty deviation class".into()));
    }
    let params = LimitParams::default();
    let grid = model.grid();
    let rows = map_paths(model, subgame, n_paths, seed, |path, theta| {
        let eq = [family.strategy(0, path, theta), family.strategy(1, path, theta)];
        let (v0, out) = path_payoff_trusted(path, eq[0].as_ref(), eq[1].as_ref(), 0, theta, &params)?;
        let v1 = path_payoff_trusted(path, eq[1].as_ref(), eq[0].as_ref(), 1, theta, &params)?.0;
        let v = [v0, v1];
        let mut row = vec![v0, v1];
        for d in &deviations.deviations {
            for i in 0..2 {
                let s = d.strategy(i, grid, path, theta)?;
                let w = path_payoff_trusted(path, s.as_ref(), eq[1 - i].as_ref(), i, theta, &params)?.0;
                row.push(w - v[i]);
            }
        }
        Ok((row, out))
    })?;
    let col = |c: usize| rows.iter().map(|r| r.0[c]).collect::<Vec<_>>();
    let payoffs = [PayoffEstimate::from_samples(&col(0), seed), PayoffEstimate::from_samples(&col(1), seed)];
    let mut gaps = Vec::new();
    for (d_idx, d) in deviations.deviations.iter().enumerate() {
        for i in 0..2 {
            let (gap, se) = mean_se(&col(2 + 2 * d_idx + i));
            gaps.push(DeviationGap { player: i + 1, deviation: d.id(), gap, std_error: se, pass: tol.allows(gap, se) });
        }
    }
    let comparator = comparator.map(|c| ComparatorCheck {
        value: c,
        pass: (0..2).all(|i| tol.allows((payoffs[i].mean - c[i]).abs(), payoffs[i].std_error)),
    });
    let verdict = gaps.iter().all(|g| g.pass);
    Ok(EquilibriumReport {
        subgame: subgame.id.clone(),
        family: family.name().to_string(),
        n_paths,
        seed,
        payoffs,
        comparator,
        deviation_class: deviations.ids(),
        gaps,
        tolerance: tol,
        verdict,
        outcomes: rows.iter().take(REPORTED_OUTCOMES).map(|r| r.1).collect(),
    })
}
