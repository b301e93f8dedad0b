use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::net::{stack, Net};
use super::{AgentConfig, Batch, ReplayBuffer, RlError, UpdateOutcome};
use crate::nn::Activation;

/// Twin-delayed DDPG with a tanh-bounded deterministic actor.
#[derive(Clone, Debug)]
pub struct Td3 {
    pub config: AgentConfig,
    pub state_dim: usize,
    pub action_dim: usize,
    pub actor: Net,
    pub actor_target: Net,
    pub critics: [Net; 2],
    pub critic_targets: [Net; 2],
    pub updates: u64,
}

impl Td3 {
    pub fn new<R: Rng>(state_dim: usize, action_dim: usize, config: AgentConfig, rng: &mut R) -> Self {
        let h = config.hidden.clone();
        let actor = Net::new(state_dim, &h, action_dim, Activation::Tanh, Some(config.final_bound), config.lr, rng);
        let critic = |rng: &mut R| Net::new(state_dim + action_dim, &h, 1, Activation::Linear, None, config.lr, rng);
        let critics = [critic(rng), critic(rng)];
        Self {
            state_dim,
            action_dim,
            actor_target: actor.clone(),
            actor,
            critic_targets: critics.clone(),
            critics,
            config,
            updates: 0,
        }
    }

    /// Actor output in `[−1, 1]`, with clipped Gaussian exploration noise
    /// when `explore` is set.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], explore: bool, rng: &mut R) -> Vec<f64> {
        let x = Array2::from_shape_vec((self.state_dim, 1), state.to_vec()).expect("state dimension");
        let mut a = self.actor.eval(x.view()).column(0).to_vec();
        if explore {
            for v in &mut a {
                let n: f64 = rng.sample(StandardNormal);
                *v = (*v + self.config.explore_noise * n).clamp(-1.0, 1.0);
            }
        }
        a
    }

    pub fn update<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<UpdateOutcome, RlError> {
        let cfg = &self.config;
        if buffer.len() < cfg.batch {
            return Ok(UpdateOutcome::NotReady);
        }
        let b = Batch::sample(buffer, cfg.batch, rng);
        let n = b.len() as f64;

        // Target: r + γ (1 − d) min_i Q'_i(s', π'(s') + clipped noise).
        let mut a_next = self.actor_target.eval(b.s_next.view());
        for v in a_next.iter_mut() {
            let eps: f64 = rng.sample(StandardNormal);
            let noise = (cfg.policy_noise * eps).clamp(-cfg.noise_clip, cfg.noise_clip);
            *v = (*v + noise).clamp(-1.0, 1.0);
        }
        let xn = stack(b.s_next.view(), a_next.view());
        let q1n = self.critic_targets[0].eval(xn.view());
        let q2n = self.critic_targets[1].eval(xn.view());
        let y: Vec<f64> =
            (0..b.len()).map(|j| b.r[j] + cfg.gamma * (1.0 - b.done[j]) * q1n[[0, j]].min(q2n[[0, j]])).collect();

        let x = stack(b.s.view(), b.a.view());
        let mut critic_loss = 0.0;
        for critic in &mut self.critics {
            let trace = critic.forward(x.view());
            let q = trace.values();
            let mut up = trace.zero_grad();
            for j in 0..b.len() {
                let d = q[[0, j]] - y[j];
                critic_loss += 0.5 * d * d / n;
                up[[0, j]] = 2.0 * d / n;
            }
            let (_, g) = critic.backward(&trace, up);
            critic.apply(&g)?;
        }
        if !critic_loss.is_finite() {
            return Err(RlError::NonFiniteLoss { what: "TD3 critic", update: self.updates });
        }
        self.updates += 1;

        let mut actor_loss = None;
        if self.updates % cfg.policy_delay as u64 == 0 {
            let at = self.actor.forward(b.s.view());
            let xa = stack(b.s.view(), at.values());
            let ct = self.critics[0].forward(xa.view());
            let loss = -ct.values().sum() / n;
            if !loss.is_finite() {
                return Err(RlError::NonFiniteLoss { what: "TD3 actor", update: self.updates });
            }
            let up = Array2::from_elem((1, b.len()), -1.0 / n);
            let (dx, _) = self.critics[0].backward(&ct, up);
            let (_, g) = self.actor.backward(&at, dx.slice(s![self.state_dim.., ..]).to_owned());
            self.actor.apply(&g)?;
            let tau = cfg.tau;
            self.actor_target.soft_update(&self.actor, tau);
            for (t, c) in self.critic_targets.iter_mut().zip(&self.critics) {
                t.soft_update(c, tau);
            }
            actor_loss = Some(loss);
        }
        Ok(UpdateOutcome::Updated { critic_loss, actor_loss })
    }
}
