//! Off-policy continuous-control agents (TD3, SAC), replay, action maps,
//! state normalisation, rewards and policy checkpoints.

mod bandit;
mod buffer;
mod checkpoint;
mod env;
mod net;
mod sac;
mod td3;

pub use bandit::QuadraticBandit;
pub use buffer::{ReplayBuffer, Transition};
pub use checkpoint::{Policy, PolicyCheckpoint, POLICY_FORMAT, POLICY_VERSION};
pub use env::{
    lyapunov_state, pinn_state, reward_lyapunov, reward_pinn, ActionSpec, RunningStats, DIVERGENCE_REWARD,
    LYAPUNOV_STATE_DIM, PINN_STATE_DIM,
};
pub use net::Net;
pub use sac::{ActorGrad, Sac};
pub use td3::Td3;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum RlError {
    #[error("{what} loss is not finite at update {update}")]
    NonFiniteLoss { what: &'static str, update: u64 },
    #[error("state has {got} components, policy expects {expected}")]
    StateDimension { expected: usize, got: usize },
    #[error("policy checkpoint version mismatch: found {found}, expected {expected}")]
    VersionMismatch { found: String, expected: String },
    #[error("malformed policy checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Td3,
    Sac,
}

/// Hyperparameters shared by both agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch: usize,
    pub buffer: usize,
    pub hidden: Vec<usize>,
    /// Uniform bound for the actor's output layer at initialisation; small
    /// values start the policy near the centre of the action box.
    pub final_bound: f64,
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub explore_noise: f64,
    pub policy_delay: usize,
    pub init_temperature: f64,
    /// Disables temperature tuning and uses this value.
    pub fixed_temperature: Option<f64>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            lr: 3e-4,
            batch: 256,
            buffer: 100_000,
            hidden: vec![64, 64],
            final_bound: 3e-3,
            policy_noise: 0.2,
            noise_clip: 0.5,
            explore_noise: 0.1,
            policy_delay: 2,
            init_temperature: 0.1,
            fixed_temperature: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum UpdateOutcome {
    /// Fewer transitions than one minibatch.
    NotReady,
    /// `critic_loss` is the mean over the twin critics of their minibatch MSE.
    Updated { critic_loss: f64, actor_loss: Option<f64> },
}

/// Minibatch in column layout.
pub(crate) struct Batch {
    pub s: Array2<f64>,
    pub a: Array2<f64>,
    pub r: Vec<f64>,
    pub s_next: Array2<f64>,
    pub done: Vec<f64>,
}

impl Batch {
    pub fn sample<R: Rng + ?Sized>(buffer: &ReplayBuffer, n: usize, rng: &mut R) -> Self {
        let idx = buffer.sample_indices(n, rng);
        let first = buffer.get(idx[0]);
        let (sd, ad) = (first.s.len(), first.a.len());
        let mut b = Batch {
            s: Array2::zeros((sd, n)),
            a: Array2::zeros((ad, n)),
            r: Vec::with_capacity(n),
            s_next: Array2::zeros((sd, n)),
            done: Vec::with_capacity(n),
        };
        for (j, &i) in idx.iter().enumerate() {
            let t = buffer.get(i);
            for k in 0..sd {
                b.s[[k, j]] = t.s[k];
                b.s_next[[k, j]] = t.s_next[k];
            }
            for k in 0..ad {
                b.a[[k, j]] = t.a[k];
            }
            b.r.push(t.r);
            b.done.push(if t.done { 1.0 } else { 0.0 });
        }
        b
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }
}

/// Either agent behind one interface.
#[derive(Clone, Debug)]
pub enum Agent {
    Td3(Td3),
    Sac(Sac),
}

impl Agent {
    pub fn new<R: Rng>(kind: AgentKind, state_dim: usize, action_dim: usize, config: AgentConfig, rng: &mut R) -> Self {
        match kind {
            AgentKind::Td3 => Agent::Td3(Td3::new(state_dim, action_dim, config, rng)),
            AgentKind::Sac => Agent::Sac(Sac::new(state_dim, action_dim, config, rng)),
        }
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            Agent::Td3(_) => AgentKind::Td3,
            Agent::Sac(_) => AgentKind::Sac,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        match self {
            Agent::Td3(a) => &a.config,
            Agent::Sac(a) => &a.config,
        }
    }

    /// Raw action in `[−1, 1]^d`.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], explore: bool, rng: &mut R) -> Vec<f64> {
        match self {
            Agent::Td3(a) => a.act(state, explore, rng),
            Agent::Sac(a) => a.act(state, explore, rng),
        }
    }

    pub fn update<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<UpdateOutcome, RlError> {
        match self {
            Agent::Td3(a) => a.update(buffer, rng),
            Agent::Sac(a) => a.update(buffer, rng),
        }
    }
}
