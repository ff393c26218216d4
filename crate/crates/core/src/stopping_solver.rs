//! Optimal stopping on recombining lattices, first-hit times and empirical
//! drift classification.
//!
//! Discounting lives inside the payoff functions, so backward induction takes
//! plain expectations.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sampling::par_units;
use crate::strategy_model::StatePath;
use crate::{Error, Result};

/// Relative tolerance for detecting contact between value and payoff.
pub const STOP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Transitions {
    /// Node `j` of slice `k` moves to node `j + 1` with `p_up`, else to `j`.
    Binomial { p_up: f64 },
    /// Explicit `(next node, probability)` lists per node.
    General(Vec<Vec<Vec<(usize, f64)>>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovLattice {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub transitions: Transitions,
}

impl MarkovLattice {
    /// Recombining binomial tree for a geometric Brownian motion with drift
    /// `mu` and volatility `sigma`, matching the one-step mean.
    pub fn binomial_gbm(x0: f64, mu: f64, sigma: f64, horizon: f64, steps: usize) -> Result<Self> {
        if !(x0 > 0.0) || steps == 0 || !(horizon > 0.0) || sigma == 0.0 {
            return Err(Error::Lattice(format!(
                "bad binomial parameters x0={x0}, sigma={sigma}, horizon={horizon}, steps={steps}"
            )));
        }
        let dt = horizon / steps as f64;
        let h = sigma.abs() * dt.sqrt();
        let (u, d) = (h.exp(), (-h).exp());
        let p_up = ((mu * dt).exp() - d) / (u - d);
        if !(0.0..=1.0).contains(&p_up) {
            return Err(Error::Lattice(format!("up probability {p_up} outside [0,1]; refine the step")));
        }
        let times = (0..=steps).map(|k| k as f64 * dt).collect();
        let states = (0..=steps)
            .map(|k| (0..=k).map(|j| x0 * ((2.0 * j as f64 - k as f64) * h).exp()).collect())
            .collect();
        Ok(Self { times, states, transitions: Transitions::Binomial { p_up } })
    }

    pub fn slices(&self) -> usize {
        self.times.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.len() != self.times.len() || self.times.is_empty() {
            return Err(Error::Lattice("one state slice per time is required".into()));
        }
        match &self.transitions {
            Transitions::Binomial { p_up } => {
                if !(0.0..=1.0).contains(p_up) {
                    return Err(Error::Lattice(format!("up probability {p_up} outside [0,1]")));
                }
                for k in 1..self.states.len() {
                    if self.states[k].len() != self.states[k - 1].len() + 1 {
                        return Err(Error::Lattice(format!("slice {k} is not recombining")));
                    }
                }
            }
            Transitions::General(rows) => {
                if rows.len() + 1 != self.states.len() {
                    return Err(Error::Lattice("transitions needed for every slice but the last".into()));
                }
                for (k, slice) in rows.iter().enumerate() {
                    if slice.len() != self.states[k].len() {
                        return Err(Error::Lattice(format!("slice {k}: transition rows do not match states")));
                    }
                    for (j, row) in slice.iter().enumerate() {
                        let total: f64 = row.iter().map(|e| e.1).sum();
                        if (total - 1.0).abs() > 1e-12 {
                            return Err(Error::Lattice(format!("node ({k},{j}): probabilities sum to {total}")));
                        }
                        if row.iter().any(|&(to, p)| to >= self.states[k + 1].len() || p < 0.0) {
                            return Err(Error::Lattice(format!("node ({k},{j}): bad transition")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Expectation of `next` (values on slice `k + 1`) from node `(k, j)`.
    pub fn expect(&self, k: usize, j: usize, next: &[f64]) -> f64 {
        match &self.transitions {
            Transitions::Binomial { p_up } => p_up * next[j + 1] + (1.0 - p_up) * next[j],
            Transitions::General(rows) => rows[k][j].iter().map(|&(to, p)| p * next[to]).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnellSolution {
    pub value: Vec<Vec<f64>>,
    pub payoff: Vec<Vec<f64>>,
    pub stop: Vec<Vec<bool>>,
}

impl SnellSolution {
    /// First slice at which a lattice path, given by its node index per slice,
    /// enters the stop region; `None` if it never does.
    pub fn first_stop(&self, nodes: &[usize]) -> Option<usize> {
        nodes.iter().enumerate().position(|(k, &j)| self.stop[k][j])
    }

    /// Largest violation of the envelope conditions: value dominates payoff
    /// and the one-step expectation, with equality to one of them.
    pub fn envelope_defect(&self, lat: &MarkovLattice) -> f64 {
        let mut worst: f64 = 0.0;
        let last = self.value.len() - 1;
        for k in 0..last {
            for j in 0..self.value[k].len() {
                let v = self.value[k][j];
                let c = lat.expect(k, j, &self.value[k + 1]);
                let p = self.payoff[k][j];
                let scale = 1.0 + v.abs();
                worst = worst.max((p - v).max(0.0) / scale);
                worst = worst.max((c - v).max(0.0) / scale);
                worst = worst.max((v - p).min(v - c).abs() / scale);
            }
        }
        worst
    }
}

/// Backward induction `V_k = max(payoff_k, E[V_{k+1}])` with `V` on the last
/// slice given by `terminal`. Both functions take `(t, state)`.
pub fn snell_envelope(
    lat: &MarkovLattice,
    payoff: &dyn Fn(f64, f64) -> f64,
    terminal: &dyn Fn(f64, f64) -> f64,
) -> Result<SnellSolution> {
    lat.validate()?;
    let n = lat.slices();
    let mut value = vec![Vec::new(); n];
    let mut pay = vec![Vec::new(); n];
    let mut stop = vec![Vec::new(); n];
    let touches = |v: f64, p: f64| (v - p).abs() <= STOP_TOL * p.abs().max(1.0);

    let t_last = lat.times[n - 1];
    pay[n - 1] = lat.states[n - 1].iter().map(|&x| payoff(t_last, x)).collect();
    value[n - 1] = lat.states[n - 1].iter().map(|&x| terminal(t_last, x)).collect();
    stop[n - 1] = value[n - 1].iter().zip(&pay[n - 1]).map(|(&v, &p)| touches(v, p)).collect();

    for k in (0..n - 1).rev() {
        let t = lat.times[k];
        let (head, tail) = value.split_at_mut(k + 1);
        let next = &tail[0];
        let mut vk = Vec::with_capacity(lat.states[k].len());
        let mut pk = Vec::with_capacity(lat.states[k].len());
        let mut sk = Vec::with_capacity(lat.states[k].len());
        for (j, &x) in lat.states[k].iter().enumerate() {
            let p = payoff(t, x);
            let v = p.max(lat.expect(k, j, next));
            vk.push(v);
            pk.push(p);
            sk.push(touches(v, p));
        }
        head[k] = vk;
        pay[k] = pk;
        stop[k] = sk;
    }
    Ok(SnellSolution { value, payoff: pay, stop })
}

/// First index at or after `start` where `region(k, state)` holds; the path
/// length stands for `∞`.
pub fn hitting_time<P: StatePath + ?Sized>(
    path: &P,
    region: impl Fn(usize, f64) -> bool,
    start: usize,
) -> usize {
    let n = path.nodes();
    (start.min(n)..n).find(|&k| region(k, path.state(k))).unwrap_or(n)
}

// ---------------------------------------------------------------------------
// Drift classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drift {
    Submartingale,
    Supermartingale,
    Martingale,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketDrift {
    /// State range `[lo, hi]` of the bucket at time `s`.
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub drift: f64,
    pub std_error: f64,
    /// `+1`, `-1`, or `0` when within the tolerance band.
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftResult {
    pub s: usize,
    pub t: usize,
    pub verdict: Drift,
    /// Every bucket has the verdict's sign.
    pub strict: bool,
    pub buckets: Vec<BucketDrift>,
}

/// Estimate `E[X_t - X_s | X_s]` from simulated paths of a process, bucketed
/// by deciles of `X_s`, and classify the sign pattern at `tol_sd` standard
/// errors.
pub fn drift_classify<F>(
    sample: F,
    pairs: &[(usize, usize)],
    n_paths: usize,
    seed: u64,
    tol_sd: f64,
) -> Result<Vec<DriftResult>>
where
    F: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    if n_paths < 100 {
        return Err(Error::Precondition(format!("drift tests need at least 100 paths, got {n_paths}")));
    }
    if let Some(&(s, t)) = pairs.iter().find(|(s, t)| s >= t) {
        return Err(Error::Precondition(format!("pair ({s},{t}) is not ordered")));
    }
    let mut idx: Vec<usize> = pairs.iter().flat_map(|&(s, t)| [s, t]).collect();
    idx.sort_unstable();
    idx.dedup();
    let rows: Vec<Vec<f64>> = par_units(n_paths, seed, |_, rng| {
        let x = sample(rng);
        idx.iter().map(|&k| x.get(k).copied().unwrap_or(f64::NAN)).collect()
    });
    if rows.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::Shape("sampled process shorter than the requested indices".into()));
    }
    let col = |k: usize| idx.binary_search(&k).expect("index collected above");
    Ok(pairs
        .iter()
        .map(|&(s, t)| {
            let (cs, ct) = (col(s), col(t));
            let obs: Vec<(f64, f64)> = rows.iter().map(|r| (r[cs], r[ct] - r[cs])).collect();
            classify_pair(s, t, obs, tol_sd)
        })
        .collect())
}

fn classify_pair(s: usize, t: usize, mut obs: Vec<(f64, f64)>, tol_sd: f64) -> DriftResult {
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = obs.len();
    let mut cuts: Vec<f64> = (1..10).map(|q| obs[q * n / 10].0).collect();
    cuts.dedup();
    let mut buckets = Vec::new();
    let mut start = 0;
    for b in 0..=cuts.len() {
        let end = if b < cuts.len() { obs.partition_point(|o| o.0 < cuts[b]) } else { n };
        let slice = &obs[start..end];
        start = end;
        if slice.len() < 2 {
            continue;
        }
        let d: Vec<f64> = slice.iter().map(|o| o.1).collect();
        let (mean, se) = crate::sampling::mean_se(&d);
        let scale = slice.iter().map(|o| o.0.abs()).fold(1.0, f64::max);
        let band = tol_sd * se + 1e-12 * scale;
        let sign = if mean > band {
            1
        } else if mean < -band {
            -1
        } else {
            0
        };
        buckets.push(BucketDrift {
            lo: slice[0].0,
            hi: slice[slice.len() - 1].0,
            n: slice.len(),
            drift: mean,
            std_error: se,
            sign,
        });
    }
    let pos = buckets.iter().any(|b| b.sign > 0);
    let neg = buckets.iter().any(|b| b.sign < 0);
    let verdict = match (pos, neg) {
        (true, false) => Drift::Submartingale,
        (false, true) => Drift::Supermartingale,
        (false, false) if !buckets.is_empty() => Drift::Martingale,
        _ => Drift::Inconclusive,
    };
    let want = match verdict {
        Drift::Submartingale => 1,
        Drift::Supermartingale => -1,
        _ => 0,
    };
    let strict = !buckets.is_empty() && buckets.iter().all(|b| b.sign == want);
    DriftResult { s, t, verdict, strict, buckets }
}
