//! Fixtures shared by the integration tests and the acceptance target.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use timing_games::payoff_engine::GameProcesses;
use timing_games::sampling::stream_rng;
use timing_games::strategy_model::{StrategyPath, TimeGrid};

pub fn path(g: &[f64], alpha: &[f64]) -> StrategyPath {
    StrategyPath::new(g.to_vec(), alpha.to_vec()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, 0)
}

// ---------------------------------------------------------------------------
// Symmetric fixture with L = F > M at the preemption time
// ---------------------------------------------------------------------------

pub const HALF_KSTAR: usize = 1000;
pub const HALF_KAPPA: f64 = 1e-4;

/// `F = 1`, `M = 0`; `L` climbs linearly to `F` at node `k*`, then stays
/// above it by `κ s²`, so the indifference intensities vanish at `k*`.
pub fn symmetric_half_fixture() -> (TimeGrid, GameProcesses) {
    let grid = TimeGrid::uniform(2 * HALF_KSTAR, 0.2).unwrap();
    let dt = 1e-4;
    let l: Vec<f64> = (0..grid.len())
        .map(|k| {
            if k <= HALF_KSTAR {
                1.0 - (HALF_KSTAR - k) as f64 * dt
            } else {
                let s = (k - HALF_KSTAR) as f64 * dt;
                1.0 + HALF_KAPPA * s * s
            }
        })
        .collect();
    let n = grid.len();
    let gp = GameProcesses::symmetric(l, vec![1.0; n], vec![0.0; n], 0.0).unwrap();
    (grid, gp)
}

// ---------------------------------------------------------------------------
// Both active at τ̂ with α_i(τ̂) = 0 < α_j(τ̂) < 1
// ---------------------------------------------------------------------------

pub struct LimitCase {
    pub s_i: StrategyPath,
    pub s_j: StrategyPath,
    pub tau: usize,
    pub a_j: f64,
}

/// Random fixture for the limit case: `G_i` jumps to 1 at `τ̂` from a random
/// level with `α_i(τ̂) = 0` and random positive intensities afterwards, while
/// `j` jumps at `τ̂` with a constant intensity `a_j`.
pub fn limit_case(seed: u64) -> LimitCase {
    let mut r = rng(seed);
    let n = 160;
    let tau = r.random_range(5..60);
    let a_j = r.random_range(0.01..0.99);
    let gi0 = r.random_range(0.0..0.9);
    let gj0 = r.random_range(0.0..0.9);
    let mut gi = vec![0.0; n];
    let mut gj = vec![0.0; n];
    let mut ai = vec![0.0; n];
    let mut aj = vec![0.0; n];
    for k in 1..tau {
        gi[k] = gi0 * k as f64 / tau as f64;
        gj[k] = gj0 * (k as f64 / tau as f64).powi(2);
    }
    for k in tau..n {
        gi[k] = 1.0;
        gj[k] = 1.0;
        aj[k] = a_j;
        if k > tau {
            ai[k] = r.random_range(1e-3..1.0);
        }
    }
    LimitCase { s_i: path(&gi, &ai), s_j: path(&gj, &aj), tau, a_j }
}

// ---------------------------------------------------------------------------
// Random valid strategies
// ---------------------------------------------------------------------------

/// A valid strategy on `n` nodes starting at `theta`: `G` rises by random
/// steps, may reach 1, and carries intensities only where it equals 1.
pub fn random_strategy(r: &mut ChaCha8Rng, n: usize, theta: usize) -> StrategyPath {
    let mut g = vec![0.0; n];
    let mut alpha = vec![0.0; n];
    let full = if r.random_bool(0.7) { Some(r.random_range(theta..n)) } else { None };
    let mut level: f64 = 0.0;
    for k in theta..n {
        if full.is_some_and(|f| k >= f) {
            level = 1.0;
        } else if r.random_bool(0.3) {
            level = (level + r.random_range(0.0..0.4)).min(0.95);
        }
        g[k] = level;
        if level == 1.0 {
            alpha[k] = match r.random_range(0..4) {
                0 => 0.0,
                1 => 1.0,
                _ => r.random_range(0.0..1.0),
            };
        }
    }
    path(&g, &alpha)
}

/// Random processes with `F >= M`.
pub fn random_processes(r: &mut ChaCha8Rng, n: usize) -> GameProcesses {
    let mut draw = || -> [Vec<f64>; 3] {
        let l: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let f: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let m: Vec<f64> = f.iter().map(|&x| x - r.random_range(0.0..1.0)).collect();
        [l, f, m]
    };
    let [l0, f0, m0] = draw();
    let [l1, f1, m1] = draw();
    let m_inf = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
    GameProcesses::new([l0, l1], [f0, f1], [m0, m1], m_inf).unwrap()
}

// ---------------------------------------------------------------------------
// Deterministic preemption with asymmetric leader payoffs
// ---------------------------------------------------------------------------

/// `F = 1`, `M = 0`, `L¹ = 0.5 + t`, `L² = 0.5 + t/2` on `[0, 2]`, so player 2
/// reaches `L² = F` exactly at `t = 1` while player 1 already prefers to lead.
pub fn asymmetric_fixture() -> (TimeGrid, GameProcesses) {
    let grid = TimeGrid::uniform(200, 2.0).unwrap();
    let n = grid.len();
    let l1 = grid.times().iter().map(|t| 0.5 + t).collect();
    let l2 = grid.times().iter().map(|t| 0.5 + t / 2.0).collect();
    let gp = GameProcesses::new([l1, l2], [vec![1.0; n], vec![1.0; n]], [vec![0.0; n], vec![0.0; n]], [0.0; 2])
        .unwrap();
    (grid, gp)
}
