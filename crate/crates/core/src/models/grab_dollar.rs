//! Grab-the-dollar: whoever stops alone wins a prize, simultaneous stopping
//! costs both, and being second is worth nothing.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gbm::sample_log_gbm;
use crate::payoff_engine::{PathModel, Payoffs};
use crate::strategy_model::{StatePath, StepStrategy, Strategy, StrategyFamily, StoppingRule, TimeGrid};
use crate::{Error, Result};

/// Player 1 wins 1 unit, player 2 wins `X_t` units of another currency, where
/// `X` is a geometric Brownian exchange rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrabDollarParams {
    pub r: f64,
    pub x0: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl GrabDollarParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.x0 > 0.0) {
            return Err(Error::Model(format!("exchange rate x0={} must be positive", self.x0)));
        }
        if !(self.r > 0.0) || !(self.sigma >= 0.0) || !self.mu.is_finite() {
            return Err(Error::Model("grab_dollar needs r > 0, sigma >= 0 and finite mu".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GrabDollarModel {
    pub params: GrabDollarParams,
    grid: TimeGrid,
    disc: Arc<Vec<f64>>,
    dt: f64,
}

#[derive(Debug, Clone)]
pub struct GrabPath {
    pub log_x: Vec<f64>,
    disc: Arc<Vec<f64>>,
}

impl GrabPath {
    pub fn x(&self, k: usize) -> f64 {
        self.log_x[k].exp()
    }
}

impl Payoffs for GrabPath {
    fn payoff_nodes(&self) -> usize {
        self.log_x.len()
    }
    fn l(&self, i: usize, k: usize) -> f64 {
        if i == 0 {
            self.disc[k]
        } else {
            self.x(k) * self.disc[k]
        }
    }
    fn f(&self, _i: usize, _k: usize) -> f64 {
        0.0
    }
    fn m(&self, _i: usize, k: usize) -> f64 {
        -self.disc[k]
    }
    fn m_inf(&self, _i: usize) -> f64 {
        0.0
    }
}

impl StatePath for GrabPath {
    fn nodes(&self) -> usize {
        self.log_x.len()
    }
    fn state(&self, k: usize) -> f64 {
        self.x(k)
    }
}

impl PathModel for GrabDollarModel {
    type Path = GrabPath;

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn sample_path(&self, x0: f64, rng: &mut ChaCha8Rng) -> GrabPath {
        let p = &self.params;
        GrabPath { log_x: sample_log_gbm(x0, p.mu, p.sigma, self.dt, self.grid.len(), rng), disc: self.disc.clone() }
    }
}

impl GrabDollarModel {
    /// `k` pure stopping times spread over the horizon.
    pub fn deviation_rules(&self, k: usize) -> Vec<(String, StoppingRule)> {
        let horizon = self.grid.time(self.grid.len() - 1);
        (0..k)
            .map(|i| {
                let t = horizon * (i + 1) as f64 / (k + 1) as f64;
                (format!("time_{i:02}"), StoppingRule::AtTime(t))
            })
            .collect()
    }
}

/// Both grab at once: `G = 1{t >= ϑ}`, `α_1 = X/(1+X)`, `α_2 = 1/2`.
#[derive(Debug, Clone, Default)]
pub struct GrabDollarFamily;

impl StrategyFamily<GrabPath> for GrabDollarFamily {
    fn name(&self) -> &str {
        "grab_dollar"
    }
    fn strategy<'a>(&'a self, player: usize, path: &'a GrabPath, theta: usize) -> Box<dyn Strategy + 'a> {
        let n = path.log_x.len();
        if player == 0 {
            Box::new(StepStrategy::new(n, theta, move |k| {
                let x = path.x(k);
                x / (1.0 + x)
            }))
        } else {
            Box::new(StepStrategy::new(n, theta, |_| 0.5))
        }
    }
}

pub fn build_grab_dollar(
    p: &GrabDollarParams,
    steps: usize,
    horizon: f64,
) -> Result<(GrabDollarModel, GrabDollarFamily)> {
    p.validate()?;
    let grid = TimeGrid::uniform(steps, horizon)?;
    let disc = Arc::new(grid.times().iter().map(|t| (-p.r * t).exp()).collect());
    Ok((GrabDollarModel { params: *p, grid, disc, dt: horizon / steps as f64 }, GrabDollarFamily))
}
