//! Preemptive market entry with a geometric Brownian profit flow.
//!
//! Each firm earns `X_t` once both have invested and `m X_t` as a monopolist;
//! investment costs `I`. The follower invests when `X` reaches `x^F`. Values
//! below are at state `x` and time 0; paths discount them by `e^{-rt}`.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::payoff_engine::{PathModel, Payoffs};
use crate::stopping_solver::{snell_envelope, MarkovLattice, SnellSolution};
use crate::strategy_model::{StatePath, StepStrategy, Strategy, StrategyFamily, StoppingRule, TimeGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbmEntryParams {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    /// Sunk investment cost.
    #[serde(rename = "I")]
    pub cost: f64,
    /// Monopoly markup.
    pub m: f64,
    /// Initial profit flow.
    pub x0: f64,
}

impl GbmEntryParams {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.r > self.mu.max(0.0)) {
            errs.push(format!("r={} must exceed max(mu, 0)", self.r));
        }
        if !(self.m > 1.0) {
            errs.push(format!("markup m={} must exceed 1", self.m));
        }
        if !(self.cost > 0.0) {
            errs.push(format!("I={} must be positive", self.cost));
        }
        if !(self.sigma > 0.0) {
            errs.push(format!("sigma={} must be positive", self.sigma));
        }
        if !(self.x0 > 0.0) {
            errs.push(format!("x0={} must be positive", self.x0));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Model(errs.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmClosedForms {
    pub params: GbmEntryParams,
    pub beta1: f64,
    pub x_f: f64,
    pub x_p: f64,
}

/// Positive root of `σ²β(β-1)/2 + μβ - r = 0`.
pub fn beta1(p: &GbmEntryParams) -> f64 {
    let s2 = p.sigma * p.sigma;
    let b = p.mu - 0.5 * s2;
    (-b + (b * b + 2.0 * s2 * p.r).sqrt()) / s2
}

pub fn gbm_closed_forms(p: &GbmEntryParams) -> Result<GbmClosedForms> {
    p.validate()?;
    let beta = beta1(p);
    let x_f = beta / (beta - 1.0) * (p.r - p.mu) * p.cost;
    let mut cf = GbmClosedForms { params: *p, beta1: beta, x_f, x_p: f64::NAN };
    cf.x_p = cf.bisect_x_p()?;
    Ok(cf)
}

impl GbmClosedForms {
    fn growth(&self) -> f64 {
        self.params.r - self.params.mu
    }

    /// Follower value.
    pub fn follower(&self, x: f64) -> f64 {
        let p = &self.params;
        if x < self.x_f {
            (x / self.x_f).powf(self.beta1) * (self.x_f / self.growth() - p.cost)
        } else {
            x / self.growth() - p.cost
        }
    }

    /// Leader value: monopoly flow until the follower enters.
    pub fn leader(&self, x: f64) -> f64 {
        let p = &self.params;
        if x < self.x_f {
            p.m * x / self.growth() - p.cost
                + (x / self.x_f).powf(self.beta1) * self.x_f * (1.0 - p.m) / self.growth()
        } else {
            self.follower(x)
        }
    }

    /// Value of simultaneous investment.
    pub fn simultaneous(&self, x: f64) -> f64 {
        x / self.growth() - self.params.cost
    }

    /// Equilibrium intensity: indifference value in the preemption region,
    /// 1 from `x^F` on, 0 below `x^P`.
    pub fn alpha(&self, x: f64) -> f64 {
        if x >= self.x_f {
            1.0
        } else if x > self.x_p {
            let (l, f, m) = (self.leader(x), self.follower(x), self.simultaneous(x));
            ((l - f) / (l - m)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    /// `E[e^{-rτ} F(X_τ)]` for `τ` the first hit of `x^P` from `x0 < x^P`.
    pub fn hitting_comparator(&self, x0: f64) -> f64 {
        if x0 < self.x_p {
            (x0 / self.x_p).powf(self.beta1) * self.follower(self.x_p)
        } else {
            self.follower(x0)
        }
    }

    fn bisect_x_p(&self) -> Result<f64> {
        let d = |x: f64| self.leader(x) - self.follower(x);
        const SCAN: usize = 1000;
        let mut lo = f64::NAN;
        let mut hi = f64::NAN;
        for k in 1..SCAN {
            let x = self.x_f * k as f64 / SCAN as f64;
            if d(x) > 0.0 {
                lo = self.x_f * (k - 1) as f64 / SCAN as f64;
                hi = x;
                break;
            }
        }
        if !hi.is_finite() || d(lo.max(f64::MIN_POSITIVE)) >= 0.0 {
            return Err(Error::Numerical("no sign change of L - F below x^F".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if d(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let x = if d(hi).abs() < d(lo).abs() { hi } else { lo };
        if d(x).abs() >= 1e-10 {
            return Err(Error::Numerical(format!("x^P bisection residual {}", d(x))));
        }
        Ok(x)
    }
}

// ---------------------------------------------------------------------------
// Simulation model
// ---------------------------------------------------------------------------

/// Smallest horizon after which discounting leaves less than `1e-3` of any
/// payoff still in play.
pub fn discount_horizon(r: f64) -> f64 {
    1000f64.ln() / r
}

#[derive(Debug, Clone)]
pub struct GbmEntryModel {
    pub cf: GbmClosedForms,
    grid: TimeGrid,
    disc: Arc<Vec<f64>>,
    dt: f64,
}

#[derive(Debug, Clone)]
pub struct GbmPath {
    pub log_x: Vec<f64>,
    /// Running maximum of `log_x`.
    run_max: Vec<f64>,
    cf: GbmClosedForms,
    disc: Arc<Vec<f64>>,
}

impl GbmPath {
    pub fn new(log_x: Vec<f64>, cf: GbmClosedForms, disc: Arc<Vec<f64>>) -> Self {
        let run_max = log_x
            .iter()
            .scan(f64::NEG_INFINITY, |m, &v| {
                *m = m.max(v);
                Some(*m)
            })
            .collect();
        Self { log_x, run_max, cf, disc }
    }

    pub fn x(&self, k: usize) -> f64 {
        self.log_x[k].exp()
    }

    /// First node at or after `from` with `log X >= level`.
    pub fn first_log_at_least(&self, from: usize, level: f64) -> usize {
        self.first_log(from, |v| v >= level)
    }

    /// First node at or after `from` with `log X > level`.
    pub fn first_log_above(&self, from: usize, level: f64) -> usize {
        self.first_log(from, |v| v > level)
    }

    fn first_log(&self, from: usize, hit: impl Fn(f64) -> bool) -> usize {
        let n = self.log_x.len();
        if from >= n {
            return n;
        }
        if from == 0 || !hit(self.run_max[from - 1]) {
            return self.run_max.partition_point(|&m| !hit(m)).max(from);
        }
        (from..n).find(|&k| hit(self.log_x[k])).unwrap_or(n)
    }
}

impl Payoffs for GbmPath {
    fn payoff_nodes(&self) -> usize {
        self.log_x.len()
    }
    fn l(&self, _i: usize, k: usize) -> f64 {
        self.disc[k] * self.cf.leader(self.x(k))
    }
    fn f(&self, _i: usize, k: usize) -> f64 {
        self.disc[k] * self.cf.follower(self.x(k))
    }
    fn m(&self, _i: usize, k: usize) -> f64 {
        self.disc[k] * self.cf.simultaneous(self.x(k))
    }
    fn m_inf(&self, _i: usize) -> f64 {
        0.0
    }
}

impl StatePath for GbmPath {
    fn nodes(&self) -> usize {
        self.log_x.len()
    }
    fn state(&self, k: usize) -> f64 {
        self.x(k)
    }
    fn first_at_least(&self, from: usize, level: f64) -> usize {
        if level > 0.0 {
            self.first_log_at_least(from, level.ln())
        } else {
            from.min(self.log_x.len())
        }
    }
}

/// Exact log-normal steps of a geometric Brownian motion on a uniform grid.
pub fn sample_log_gbm(x0: f64, mu: f64, sigma: f64, dt: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let drift = (mu - 0.5 * sigma * sigma) * dt;
    let vol = sigma * dt.sqrt();
    let mut out = Vec::with_capacity(n);
    let mut lx = x0.ln();
    out.push(lx);
    for _ in 1..n {
        let z: f64 = StandardNormal.sample(rng);
        lx += drift + vol * z;
        out.push(lx);
    }
    out
}

impl GbmEntryModel {
    pub fn new(cf: GbmClosedForms, steps: usize, horizon: f64) -> Result<Self> {
        if horizon < discount_horizon(cf.params.r) {
            return Err(Error::Config(format!(
                "horizon {horizon} leaves more than 1e-3 discounted mass; need at least {:.1}",
                discount_horizon(cf.params.r)
            )));
        }
        let grid = TimeGrid::uniform(steps, horizon)?;
        let disc = Arc::new(grid.times().iter().map(|t| (-cf.params.r * t).exp()).collect());
        Ok(Self { cf, grid, disc, dt: horizon / steps as f64 })
    }

    /// `K` pure threshold rules: levels from `x^P/4` to `2x^F`, plus `x^F`.
    pub fn deviation_rules(&self, k: usize) -> Vec<(String, StoppingRule)> {
        let (lo, hi) = (0.25 * self.cf.x_p, 2.0 * self.cf.x_f);
        let mut rules: Vec<(String, StoppingRule)> = (0..k.saturating_sub(1))
            .map(|i| {
                let x = lo * (hi / lo).powf(i as f64 / (k.max(3) - 2) as f64);
                (format!("threshold_{i:02}"), StoppingRule::StateAtLeast(x))
            })
            .collect();
        rules.push(("follower_threshold".into(), StoppingRule::StateAtLeast(self.cf.x_f)));
        rules
    }
}

impl PathModel for GbmEntryModel {
    type Path = GbmPath;

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn sample_path(&self, x0: f64, rng: &mut ChaCha8Rng) -> GbmPath {
        let p = &self.cf.params;
        GbmPath::new(sample_log_gbm(x0, p.mu, p.sigma, self.dt, self.grid.len(), rng), self.cf, self.disc.clone())
    }

    fn resolve_rule(&self, rule: &StoppingRule) -> Result<StoppingRule> {
        rule.resolve(|name| match name {
            "P" | "preemption" => Ok(StoppingRule::StateAtLeast(self.cf.x_p)),
            "F" | "M" | "follower" => Ok(StoppingRule::StateAtLeast(self.cf.x_f)),
            other => Err(Error::Model(format!("unknown region '{other}' for gbm_entry"))),
        })
    }
}

/// Both firms invest at the first entry into `(x^P, ∞)`, where leading is
/// strictly better than following, with the intensity of
/// [`GbmClosedForms::alpha`].
#[derive(Debug, Clone)]
pub struct GbmEntryFamily {
    pub cf: GbmClosedForms,
}

impl StrategyFamily<GbmPath> for GbmEntryFamily {
    fn name(&self) -> &str {
        "gbm_entry"
    }
    fn strategy<'a>(&'a self, _player: usize, path: &'a GbmPath, theta: usize) -> Box<dyn Strategy + 'a> {
        let n = path.log_x.len();
        let jump = path.first_log_above(theta, self.cf.x_p.ln());
        Box::new(StepStrategy::new(n, jump, move |k| self.cf.alpha(path.x(k))))
    }
}

pub fn build_gbm_entry(
    p: &GbmEntryParams,
    steps: usize,
    horizon: f64,
) -> Result<(GbmEntryModel, GbmEntryFamily)> {
    let cf = gbm_closed_forms(p)?;
    Ok((GbmEntryModel::new(cf, steps, horizon)?, GbmEntryFamily { cf }))
}

// ---------------------------------------------------------------------------
// Lattice follower problem
// ---------------------------------------------------------------------------

/// Follower problem on a binomial lattice rooted at `x`: stop to receive
/// `e^{-rt}(x/(r-μ) - I)`, with the closed-form follower value as the terminal
/// condition.
pub fn follower_lattice(
    cf: &GbmClosedForms,
    x: f64,
    steps: usize,
    horizon: f64,
) -> Result<(MarkovLattice, SnellSolution)> {
    let p = cf.params;
    let lat = MarkovLattice::binomial_gbm(x, p.mu, p.sigma, horizon, steps)?;
    let payoff = |t: f64, x: f64| (-p.r * t).exp() * cf.simultaneous(x);
    let terminal = |t: f64, x: f64| (-p.r * t).exp() * cf.follower(x);
    let sol = snell_envelope(&lat, &payoff, &terminal)?;
    Ok((lat, sol))
}

/// One-step drift of `e^{-rt} F(X_t)` on a lattice, in units of the current
/// value: the largest absolute drift at states below `x^F` and the largest
/// drift at states from `x^F` on.
pub fn follower_lattice_drift(cf: &GbmClosedForms, lat: &MarkovLattice) -> (f64, f64) {
    let r = cf.params.r;
    let value = |k: usize| -> Vec<f64> {
        let d = (-r * lat.times[k]).exp();
        lat.states[k].iter().map(|&x| d * cf.follower(x)).collect()
    };
    let (mut below, mut above) = (0f64, f64::NEG_INFINITY);
    let mut cur = value(0);
    for k in 0..lat.slices() - 1 {
        let next = value(k + 1);
        for (j, &x) in lat.states[k].iter().enumerate() {
            let rel = (lat.expect(k, j, &next) - cur[j]) / cur[j].abs();
            if x < cf.x_f {
                below = below.max(rel.abs());
            } else {
                above = above.max(rel);
            }
        }
        cur = next;
    }
    (below, above)
}
