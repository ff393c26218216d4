//! Seeded random streams and sample statistics.
//!
//! Every Monte Carlo unit (a path, or a chunk of stage-game trials) draws from
//! its own ChaCha stream keyed by `(seed, unit index)`, so results do not
//! depend on how units are spread over worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Evaluate `f` on units `0..n` in parallel, returning results in unit order.
pub fn par_units<R, F>(n: usize, seed: u64, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> R + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}
