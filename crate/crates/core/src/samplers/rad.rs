use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::pde::{sample_interior, Domain};

/// Residual-based adaptive distribution: candidates from a uniform pool,
/// drawn with probability ∝ `|r|^k / mean(|r|^k) + c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadConfig {
    pub pool: usize,
    pub k: f64,
    pub c: f64,
}

impl Default for RadConfig {
    fn default() -> Self {
        Self { pool: 10_000, k: 1.0, c: 1.0 }
    }
}

/// Unnormalized draw weights for candidates with residuals `res`.
pub fn rad_weights(res: &[f64], k: f64, c: f64) -> Vec<f64> {
    let powered: Vec<f64> = res.iter().map(|r| r.abs().powf(k)).collect();
    let mean = powered.iter().sum::<f64>() / powered.len().max(1) as f64;
    if mean > 0.0 && mean.is_finite() {
        powered.iter().map(|p| p / mean + c).collect()
    } else {
        vec![1.0; res.len()]
    }
}

/// Draws `count` points (with replacement) from a fresh uniform pool over
/// `domain`, weighting candidates by their residuals.
pub fn rad_sample<R, F>(domain: &Domain, cfg: &RadConfig, count: usize, residual: F, rng: &mut R) -> Vec<[f64; 2]>
where
    R: Rng + ?Sized,
    F: FnOnce(&[[f64; 2]]) -> Vec<f64>,
{
    let pool = sample_interior(domain, cfg.pool, rng);
    let weights = rad_weights(&residual(&pool), cfg.k, cfg.c);
    let dist = WeightedIndex::new(&weights).expect("RAD weights are positive and finite");
    (0..count).map(|_| pool[dist.sample(rng)]).collect()
}
