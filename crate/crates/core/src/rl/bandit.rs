//! One-step quadratic bandit used to calibrate the agents.

use super::{Agent, ReplayBuffer, RlError, Transition, UpdateOutcome};
use crate::seed;

/// Reward `−(a − optimum)²` for a scalar action, constant state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticBandit {
    pub optimum: f64,
}

impl Default for QuadraticBandit {
    fn default() -> Self {
        Self { optimum: 0.37 }
    }
}

impl QuadraticBandit {
    pub const STATE: [f64; 1] = [1.0];

    pub fn reward(&self, a: f64) -> f64 {
        -(a - self.optimum).powi(2)
    }

    /// Interacts (one exploratory action per update attempt) until
    /// `updates` gradient updates have happened; returns the deterministic
    /// action afterwards.
    pub fn train(&self, agent: &mut Agent, updates: usize, seed: u64) -> Result<f64, RlError> {
        let mut rng = seed::stream(seed, "bandit", 0);
        let mut buffer = ReplayBuffer::new(agent.config().buffer);
        let s = Self::STATE.to_vec();
        let mut done = 0;
        while done < updates {
            let a = agent.act(&s, true, &mut rng);
            buffer.push(Transition { s: s.clone(), r: self.reward(a[0]), a, s_next: s.clone(), done: true });
            if let UpdateOutcome::Updated { .. } = agent.update(&buffer, &mut rng)? {
                done += 1;
            }
        }
        Ok(agent.act(&s, false, &mut rng)[0])
    }
}
