use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Self::default() }
    }
}

/// Bias-corrected Adam moments for one parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        AdamState { config, step: 0, m: vec![0.0; n_params], v: vec![0.0; n_params] }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update of `params` in place.
    ///
    /// A non-finite gradient entry aborts without touching any state.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::LengthMismatch { params: params.len(), grads: grads.len(), state: self.m.len() });
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient { index, value: grads[index], step: self.step });
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut s = AdamState::new(3, AdamConfig::default());
        let mut p = vec![1.0, -2.0, 0.5];
        s.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_is_normalised_gradient() {
        // m̂ = g, v̂ = g² at t = 1, so Δθ = -lr·g/(|g| + ε)
        let cfg = AdamConfig::default();
        let mut s = AdamState::new(3, cfg);
        let g = [0.3, -4.0, 1e-9];
        let mut p = vec![0.0; 3];
        s.step(&mut p, &g).unwrap();
        for (dp, g) in p.iter().zip(g) {
            let expected = -cfg.lr * g / (g.abs() + cfg.eps);
            assert!((dp - expected).abs() < 1e-15, "{dp} vs {expected}");
        }
    }

    #[test]
    fn constant_gradient_limit_is_sign_step() {
        let cfg = AdamConfig::default();
        let mut s = AdamState::new(2, cfg);
        let mut p = vec![0.0, 0.0];
        let g = [2.5, -0.01];
        let mut last = p.clone();
        for _ in 0..5000 {
            last.clone_from(&p);
            s.step(&mut p, &g).unwrap();
        }
        for k in 0..2 {
            let delta = p[k] - last[k];
            assert!((delta + cfg.lr * g[k].signum()).abs() < 1e-9);
        }
    }

    #[test]
    fn nan_gradient_aborts_without_side_effects() {
        let mut s = AdamState::new(2, AdamConfig::default());
        let mut p = vec![1.0, 1.0];
        let err = s.step(&mut p, &[0.1, f64::NAN]).unwrap_err();
        assert!(matches!(err, NnError::NonFiniteGradient { index: 1, .. }));
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(s.step_count(), 0);
        assert!(s.step(&mut p, &[0.1]).is_err());
    }

    proptest! {
        #[test]
        fn update_commutes_with_permutation(
            g in proptest::collection::vec(-3.0f64..3.0, 6),
            p0 in proptest::collection::vec(-1.0f64..1.0, 6),
            rot in 0usize..6,
        ) {
            let perm: Vec<usize> = (0..6).map(|i| (i + rot) % 6).collect();
            let mut a = AdamState::new(6, AdamConfig::default());
            let mut b = AdamState::new(6, AdamConfig::default());
            let mut pa = p0.clone();
            let mut pb: Vec<f64> = perm.iter().map(|&i| p0[i]).collect();
            let gb: Vec<f64> = perm.iter().map(|&i| g[i]).collect();
            for _ in 0..3 {
                a.step(&mut pa, &g).unwrap();
                b.step(&mut pb, &gb).unwrap();
            }
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(pb[k], pa[i]);
            }
        }
    }
}
