use rand::Rng;
use serde::{Deserialize, Serialize};

use super::levelset::{classifier_update, label_batch, sample_level_set, update_level, LevelUpdate, StateBox};
use super::roa::initial_level;
use super::{ClosedLoop, LyapunovError, State};
use crate::nn::{AdamConfig, AdamState, LyapunovNet};
use crate::par::Exec;

/// Budgets for one resample step of the level-set classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelSetConfig {
    pub batch: usize,
    pub horizon: usize,
    pub inner_iters: usize,
    pub steps_per_iter: usize,
    pub lr: f64,
    pub bounds: StateBox,
}

impl Default for LevelSetConfig {
    fn default() -> Self {
        Self { batch: 500, horizon: 100, inner_iters: 10, steps_per_iter: 10, lr: 1e-3, bounds: StateBox::default() }
    }
}

/// Current level, iteration and last labelled batch.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetState {
    pub c: f64,
    pub k: usize,
    pub xs: Vec<State>,
    pub labels: Vec<bool>,
    /// Consecutive stalled updates; each one halves the next expansion.
    pub stalls: u32,
}

impl LevelSetState {
    pub fn safe(&self) -> Vec<State> {
        self.xs.iter().zip(&self.labels).filter(|(_, l)| **l).map(|(x, _)| *x).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    /// `|S| / |X|` for this step's batch.
    pub safe_ratio: f64,
    /// Expansion actually used after stall shrinking.
    pub effective_alpha: f64,
    pub level: f64,
    pub stalled: bool,
    pub final_loss: f64,
}

/// Level-set expansion training of a Lyapunov candidate for a closed loop.
#[derive(Clone, Debug)]
pub struct LevelSetTrainer {
    pub system: ClosedLoop,
    pub net: LyapunovNet,
    pub adam: AdamState,
    pub config: LevelSetConfig,
    pub c0: f64,
    pub state: LevelSetState,
}

impl LevelSetTrainer {
    pub fn new(system: ClosedLoop, net: LyapunovNet, config: LevelSetConfig, exec: Exec) -> Result<Self, LyapunovError> {
        let c0 = initial_level(&system, &net, &config.bounds, exec)?;
        let adam = AdamState::new(net.params.len(), AdamConfig::with_lr(config.lr));
        let state = LevelSetState { c: c0, k: 0, xs: Vec::new(), labels: Vec::new(), stalls: 0 };
        Ok(Self { system, net, adam, config, c0, state })
    }

    /// Sample from `V(α c_k)`, label by simulation against `V(c_k)`, train
    /// the classifier, then raise the level to the largest `v` on the safe
    /// set.
    pub fn resample_step<R: Rng + ?Sized>(&mut self, alpha: f64, rng: &mut R, exec: Exec) -> Result<StepReport, LyapunovError> {
        if !(alpha >= 1.0) {
            return Err(LyapunovError::InvalidAlpha { alpha });
        }
        let effective_alpha = 1.0 + (alpha - 1.0) / f64::from(1u32 << self.state.stalls.min(30));
        let c = self.state.c;
        let cfg = &self.config;
        let xs = sample_level_set(&self.net, c, effective_alpha, cfg.batch, &cfg.bounds, rng, exec)?;
        let labels = label_batch(&self.system, &self.net, &xs, c, cfg.horizon, exec);
        let mut final_loss = f64::NAN;
        for _ in 0..cfg.inner_iters {
            let losses = classifier_update(&mut self.net, &mut self.adam, &xs, &labels, c, cfg.steps_per_iter)?;
            final_loss = losses.last().copied().unwrap_or(final_loss);
        }
        let n_safe = labels.iter().filter(|l| **l).count();
        self.state.xs = xs;
        self.state.labels = labels;
        self.state.k += 1;
        let stalled = match update_level(&self.net, &self.state.safe(), exec) {
            LevelUpdate::Raised(next) => {
                self.state.c = next;
                self.state.stalls = 0;
                false
            }
            LevelUpdate::Stalled => {
                log::warn!("level update stalled at step {} (no safe samples); keeping c = {c}", self.state.k);
                self.state.stalls += 1;
                true
            }
        };
        Ok(StepReport {
            safe_ratio: n_safe as f64 / self.state.xs.len() as f64,
            effective_alpha,
            level: self.state.c,
            stalled,
            final_loss,
        })
    }
}
