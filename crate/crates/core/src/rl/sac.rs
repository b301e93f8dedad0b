use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::net::{stack, Net};
use super::{AgentConfig, Batch, ReplayBuffer, RlError, UpdateOutcome};
use crate::nn::{Activation, AdamConfig, AdamState};

const LOG_STD_MIN: f64 = -5.0;
const LOG_STD_MAX: f64 = 2.0;
/// Keeps `log(1 − a²)` finite when `tanh` saturates.
const SQUASH_EPS: f64 = 1e-6;
const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

/// Soft actor-critic with a tanh-squashed Gaussian actor and automatic
/// temperature tuning towards entropy `−dim(a)`.
#[derive(Clone, Debug)]
pub struct Sac {
    pub config: AgentConfig,
    pub state_dim: usize,
    pub action_dim: usize,
    /// Outputs `[μ; raw log σ]`.
    pub actor: Net,
    pub critics: [Net; 2],
    pub critic_targets: [Net; 2],
    pub log_alpha: f64,
    alpha_adam: AdamState,
    pub updates: u64,
}

/// Reparameterized sample of the squashed Gaussian for a batch.
struct Sample {
    a: Array2<f64>,
    log_pi: Vec<f64>,
    eps: Array2<f64>,
    log_std: Array2<f64>,
    raw: Array2<f64>,
}

/// Gradient of the actor objective `mean(α log π − min Q)`.
pub struct ActorGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub mean_log_pi: f64,
}

impl Sac {
    pub fn new<R: Rng>(state_dim: usize, action_dim: usize, config: AgentConfig, rng: &mut R) -> Self {
        let h = config.hidden.clone();
        let actor = Net::new(state_dim, &h, 2 * action_dim, Activation::Linear, Some(config.final_bound), config.lr, rng);
        let critic = |rng: &mut R| Net::new(state_dim + action_dim, &h, 1, Activation::Linear, None, config.lr, rng);
        let critics = [critic(rng), critic(rng)];
        let log_alpha = config.fixed_temperature.unwrap_or(config.init_temperature).ln();
        let alpha_adam = AdamState::new(1, AdamConfig::with_lr(config.lr));
        Self { state_dim, action_dim, actor, critic_targets: critics.clone(), critics, log_alpha, alpha_adam, config, updates: 0 }
    }

    pub fn alpha(&self) -> f64 {
        self.config.fixed_temperature.unwrap_or_else(|| self.log_alpha.exp())
    }

    fn squash(&self, out: ArrayView2<'_, f64>, eps: Array2<f64>) -> Sample {
        let d = self.action_dim;
        let raw = out.slice(s![d.., ..]).to_owned();
        let log_std = raw.mapv(|r| LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (r.tanh() + 1.0));
        let mut a = out.slice(s![..d, ..]).to_owned();
        let mut log_pi = vec![0.0; out.ncols()];
        for ((j, i), v) in a.indexed_iter_mut() {
            let e = eps[[j, i]];
            let u = *v + log_std[[j, i]].exp() * e;
            *v = u.tanh();
            log_pi[i] += -0.5 * e * e - log_std[[j, i]] - HALF_LOG_2PI - (1.0 - *v * *v + SQUASH_EPS).ln();
        }
        Sample { a, log_pi, eps, log_std, raw }
    }

    fn noise<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        Array2::from_shape_fn((self.action_dim, n), |_| rng.sample(StandardNormal))
    }

    /// Sampled action when exploring, `tanh(μ)` otherwise; always strictly
    /// inside `(−1, 1)`.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], explore: bool, rng: &mut R) -> Vec<f64> {
        let x = Array2::from_shape_vec((self.state_dim, 1), state.to_vec()).expect("state dimension");
        let out = self.actor.eval(x.view());
        if explore {
            let eps = self.noise(1, rng);
            self.squash(out.view(), eps).a.column(0).to_vec()
        } else {
            (0..self.action_dim).map(|j| out[[j, 0]].tanh()).collect()
        }
    }

    /// Monte Carlo entropy estimate `−E[log π(a|s)]` at `state`.
    pub fn entropy<R: Rng + ?Sized>(&self, state: &[f64], samples: usize, rng: &mut R) -> f64 {
        let x = Array2::from_shape_fn((self.state_dim, samples), |(i, _)| state[i]);
        let out = self.actor.eval(x.view());
        let sample = self.squash(out.view(), self.noise(samples, rng));
        -sample.log_pi.iter().sum::<f64>() / samples as f64
    }

    fn min_q(&self, critics: &[Net; 2], s: ArrayView2<'_, f64>, a: ArrayView2<'_, f64>) -> Vec<f64> {
        let x = stack(s, a);
        let (q1, q2) = (critics[0].eval(x.view()), critics[1].eval(x.view()));
        (0..x.ncols()).map(|j| q1[[0, j]].min(q2[[0, j]])).collect()
    }

    /// Actor objective and its parameter gradient for states `s` with
    /// reparameterization noise `eps`.
    pub fn actor_grad(&self, s: ArrayView2<'_, f64>, eps: Array2<f64>) -> ActorGrad {
        let n = s.ncols();
        let d = self.action_dim;
        let alpha = self.alpha();
        let trace = self.actor.forward(s);
        let smp = self.squash(trace.values(), eps);

        let x = stack(s, smp.a.view());
        let traces = [self.critics[0].forward(x.view()), self.critics[1].forward(x.view())];
        let use_first: Vec<bool> = (0..n).map(|j| traces[0].values()[[0, j]] <= traces[1].values()[[0, j]]).collect();
        let mut dq_da = Array2::<f64>::zeros((d, n));
        let mut loss = 0.0;
        for (c, tr) in traces.iter().enumerate() {
            let mut up = tr.zero_grad();
            for j in 0..n {
                if use_first[j] == (c == 0) {
                    up[[0, j]] = 1.0;
                    loss -= tr.values()[[0, j]] / n as f64;
                }
            }
            let (dx, _) = self.critics[c].backward(tr, up);
            dq_da += &dx.slice(s![self.state_dim.., ..]);
        }
        loss += alpha * smp.log_pi.iter().sum::<f64>() / n as f64;

        let mut up = trace.zero_grad();
        let half_range = 0.5 * (LOG_STD_MAX - LOG_STD_MIN);
        for j in 0..n {
            for i in 0..d {
                let a = smp.a[[i, j]];
                let one_minus = 1.0 - a * a;
                let sigma_eps = smp.log_std[[i, j]].exp() * smp.eps[[i, j]];
                // ∂ log π / ∂u through the squashing correction.
                let dlogpi_du = 2.0 * a * one_minus / (one_minus + SQUASH_EPS);
                let dq_du = dq_da[[i, j]] * one_minus;
                let d_mu = alpha * dlogpi_du - dq_du;
                let d_log_std = alpha * (-1.0 + dlogpi_du * sigma_eps) - dq_du * sigma_eps;
                let t = smp.raw[[i, j]].tanh();
                up[[i, j]] = d_mu / n as f64;
                up[[d + i, j]] = d_log_std * half_range * (1.0 - t * t) / n as f64;
            }
        }
        let (_, grad) = self.actor.backward(&trace, up);
        let mean_log_pi = smp.log_pi.iter().sum::<f64>() / n as f64;
        ActorGrad { loss, grad, mean_log_pi }
    }

    pub fn update<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<UpdateOutcome, RlError> {
        let cfg = self.config.clone();
        if buffer.len() < cfg.batch {
            return Ok(UpdateOutcome::NotReady);
        }
        let b = Batch::sample(buffer, cfg.batch, rng);
        let n = b.len() as f64;
        let alpha = self.alpha();

        let next_out = self.actor.eval(b.s_next.view());
        let next = self.squash(next_out.view(), self.noise(b.len(), rng));
        let qn = self.min_q(&self.critic_targets, b.s_next.view(), next.a.view());
        let y: Vec<f64> = (0..b.len())
            .map(|j| b.r[j] + cfg.gamma * (1.0 - b.done[j]) * (qn[j] - alpha * next.log_pi[j]))
            .collect();

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
            return Err(RlError::NonFiniteLoss { what: "SAC critic", update: self.updates });
        }

        let eps = self.noise(b.len(), rng);
        let ag = self.actor_grad(b.s.view(), eps);
        if !ag.loss.is_finite() {
            return Err(RlError::NonFiniteLoss { what: "SAC actor", update: self.updates });
        }
        self.actor.apply(&ag.grad)?;

        if cfg.fixed_temperature.is_none() {
            let target_entropy = -(self.action_dim as f64);
            let g = -(ag.mean_log_pi + target_entropy);
            let mut la = [self.log_alpha];
            self.alpha_adam.step(&mut la, &[g])?;
            self.log_alpha = la[0];
        }
        for (t, c) in self.critic_targets.iter_mut().zip(&self.critics) {
            t.soft_update(c, cfg.tau);
        }
        self.updates += 1;
        Ok(UpdateOutcome::Updated { critic_loss, actor_loss: Some(ag.loss) })
    }
}
