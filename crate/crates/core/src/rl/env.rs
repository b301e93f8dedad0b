use serde::{Deserialize, Serialize};

use crate::samplers::{RatioVector, N_SAMPLERS};

pub const LYAPUNOV_STATE_DIM: usize = 3;
pub const PINN_STATE_DIM: usize = N_SAMPLERS + 1;

/// Reward for a diverged inner training run; the episode ends with it.
pub const DIVERGENCE_REWARD: f64 = -10.0;

/// How a raw agent action in `[−1, 1]^d` becomes an environment action.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionSpec {
    /// Affine map of a scalar onto `[lo, hi]`.
    Alpha { lo: f64, hi: f64 },
    /// Softmax of `logit_scale · a` over `n` samplers.
    Simplex { n: usize, logit_scale: f64 },
}

impl ActionSpec {
    pub fn alpha() -> Self {
        ActionSpec::Alpha { lo: 1.1, hi: 2.0 }
    }

    pub fn simplex() -> Self {
        ActionSpec::Simplex { n: N_SAMPLERS, logit_scale: 3.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            ActionSpec::Alpha { .. } => 1,
            ActionSpec::Simplex { n, .. } => *n,
        }
    }

    /// Expansion multiplier for a raw action, exactly within `[lo, hi]`.
    pub fn to_alpha(&self, raw: &[f64]) -> f64 {
        let ActionSpec::Alpha { lo, hi } = *self else { panic!("not a multiplier action") };
        let a = raw[0].clamp(-1.0, 1.0);
        (lo + 0.5 * (a + 1.0) * (hi - lo)).clamp(lo, hi)
    }

    /// Raw action that maps to `alpha`; inverse of [`Self::to_alpha`].
    pub fn from_alpha(&self, alpha: f64) -> Vec<f64> {
        let ActionSpec::Alpha { lo, hi } = *self else { panic!("not a multiplier action") };
        vec![2.0 * (alpha - lo) / (hi - lo) - 1.0]
    }

    pub fn to_ratios(&self, raw: &[f64]) -> RatioVector {
        let ActionSpec::Simplex { logit_scale, .. } = *self else { panic!("not a simplex action") };
        let logits: Vec<f64> = raw.iter().map(|a| logit_scale * a).collect();
        RatioVector::softmax(&logits)
    }
}

/// Per-component running mean and variance (Welford).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

const STD_FLOOR: f64 = 1e-6;

impl RunningStats {
    pub fn new(dim: usize) -> Self {
        Self { count: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn update(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, m2), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *m2 += d * (v - *m);
        }
    }

    pub fn std(&self, i: usize) -> f64 {
        if self.count < 2 {
            return 1.0;
        }
        (self.m2[i] / self.count as f64).sqrt().max(STD_FLOOR)
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| (v - self.mean[i]) / self.std(i)).collect()
    }
}

/// `(|S|/|X|, k/K, c/(c + c_0))`, each in `[0, 1]`.
pub fn lyapunov_state(safe_ratio: f64, k: usize, total: usize, c: f64, c0: f64) -> Vec<f64> {
    vec![safe_ratio, k as f64 / total as f64, c / (c + c0)]
}

/// Standardized `log₁₀` per-sampler residuals plus `i / N`. When `learn` is
/// set the statistics absorb this observation first.
pub fn pinn_state(res: &[f64; N_SAMPLERS], stats: &mut RunningStats, i: usize, total: usize, learn: bool) -> Vec<f64> {
    let logs: Vec<f64> = res.iter().map(|r| r.max(1e-300).log10()).collect();
    if learn {
        stats.update(&logs);
    }
    let mut s = stats.normalize(&logs);
    s.push(i as f64 / total as f64);
    s
}

/// Increment of the safe-set fraction.
pub fn reward_lyapunov(before: f64, after: f64) -> f64 {
    after - before
}

/// `−log₁₀(error + 10⁻⁸)`.
pub fn reward_pinn(error: f64) -> f64 {
    -(error + 1e-8).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rewards() {
        assert_eq!(reward_lyapunov(0.4, 0.4), 0.0);
        assert!((reward_lyapunov(0.30, 0.42) - 0.12).abs() < 1e-15);
        assert_eq!(reward_pinn(0.0), 8.0);
        assert!((reward_pinn(1e-2 - 1e-8) - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn alpha_is_bounded(a in -1e6f64..1e6) {
            let alpha = ActionSpec::alpha().to_alpha(&[a]);
            prop_assert!((1.1..=2.0).contains(&alpha));
        }

        #[test]
        fn simplex_sums_to_one(raw in proptest::array::uniform5(-1.0f64..1.0)) {
            let r = ActionSpec::simplex().to_ratios(&raw).as_array();
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(r.iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn alpha_map_round_trips() {
        let spec = ActionSpec::alpha();
        for alpha in [1.1, 1.35, 1.55, 2.0] {
            assert!((spec.to_alpha(&spec.from_alpha(alpha)) - alpha).abs() < 1e-12);
        }
        assert_eq!(spec.to_alpha(&[0.0]), 1.55);
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [[1.0, -2.0], [3.5, 0.0], [2.0, 4.0], [-1.0, 1.5]];
        let mut st = RunningStats::new(2);
        xs.iter().for_each(|x| st.update(x));
        for i in 0..2 {
            let mean = xs.iter().map(|x| x[i]).sum::<f64>() / 4.0;
            let var = xs.iter().map(|x| (x[i] - mean).powi(2)).sum::<f64>() / 4.0;
            assert!((st.mean[i] - mean).abs() < 1e-14);
            assert!((st.std(i) - var.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn state_shapes() {
        let s = lyapunov_state(0.5, 3, 10, 1.0, 1.0);
        assert_eq!(s, vec![0.5, 0.3, 0.5]);
        let mut st = RunningStats::new(5);
        let p = pinn_state(&[1e-2, 1e-3, 1e-1, 1.0, 1e-4], &mut st, 2, 10, true);
        assert_eq!(p.len(), PINN_STATE_DIM);
        assert!(p.iter().all(|v| v.is_finite()));
    }
}
