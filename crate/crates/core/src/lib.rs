//! Two-player stochastic timing games with extended mixed strategies.
//!
//! The crate resolves outcome probabilities at the first instant where an
//! extension intensity is positive, evaluates subgame payoffs path by path,
//! builds the preemption equilibria of the standard constructions and checks
//! them against a finite class of deviations by Monte Carlo.
//!
//! Time is discretized on a [`strategy_model::TimeGrid`] whose last slot
//! stands for `t = ∞`.

pub mod cli_reporting;
pub mod equilibrium_lab;
pub mod error;
pub mod models;
pub mod outcome_kernel;
pub mod payoff_engine;
pub mod sampling;
pub mod stopping_solver;
pub mod strategy_model;

pub use error::{Error, Result};
