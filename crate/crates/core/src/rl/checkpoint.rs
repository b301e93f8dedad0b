use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ActionSpec, Agent, AgentConfig, AgentKind, RlError, RunningStats};
use crate::autodiff::batch;
use crate::nn::{NetCheckpoint, NnError};

pub const POLICY_FORMAT: &str = "harvest-policy";
pub const POLICY_VERSION: u32 = 1;

/// Trained agent: actor and critic weights, action map and the state
/// normalisation statistics gathered during training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub format: String,
    pub version: u32,
    pub kind: AgentKind,
    pub config: AgentConfig,
    pub state_dim: usize,
    pub action: ActionSpec,
    pub actor: NetCheckpoint,
    pub critics: Vec<NetCheckpoint>,
    pub log_alpha: Option<f64>,
    pub normalizer: Option<RunningStats>,
    pub episodes: usize,
}

impl PolicyCheckpoint {
    pub fn from_agent(agent: &Agent, action: ActionSpec, normalizer: Option<RunningStats>, episodes: usize) -> Self {
        let net = |n: &super::Net| NetCheckpoint::new(n.spec.clone(), n.params.clone()).expect("agent nets are consistent");
        let (state_dim, actor, critics, log_alpha) = match agent {
            Agent::Td3(a) => (a.state_dim, net(&a.actor), a.critics.iter().map(net).collect(), None),
            Agent::Sac(a) => (a.state_dim, net(&a.actor), a.critics.iter().map(net).collect(), Some(a.log_alpha)),
        };
        Self {
            format: POLICY_FORMAT.into(),
            version: POLICY_VERSION,
            kind: agent.kind(),
            config: agent.config().clone(),
            state_dim,
            action,
            actor,
            critics,
            log_alpha,
            normalizer,
            episodes,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, RlError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| RlError::Format(e.to_string()))?;
        let format = value.get("format").and_then(|v| v.as_str()).unwrap_or("?");
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
        if format != POLICY_FORMAT || version != u64::from(POLICY_VERSION) {
            return Err(RlError::VersionMismatch {
                found: format!("{format} v{version}"),
                expected: format!("{POLICY_FORMAT} v{POLICY_VERSION}"),
            });
        }
        let ckpt: Self = serde_json::from_value(value).map_err(|e| RlError::Format(e.to_string()))?;
        if ckpt.actor.params.len() != ckpt.actor.spec.n_params() || ckpt.actor.spec.input_dim() != ckpt.state_dim {
            return Err(RlError::Format("actor does not match the declared dimensions".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), RlError> {
        std::fs::write(path, self.to_json()).map_err(|source| NnError::Io { path: path.display().to_string(), source })?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RlError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| NnError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn policy(&self) -> Policy {
        Policy { checkpoint: self.clone() }
    }
}

/// Frozen deterministic policy loaded from a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub checkpoint: PolicyCheckpoint,
}

impl Policy {
    /// Deterministic raw action: the actor output for TD3, `tanh(μ)` for
    /// SAC.
    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>, RlError> {
        let c = &self.checkpoint;
        if state.len() != c.state_dim {
            return Err(RlError::StateDimension { expected: c.state_dim, got: state.len() });
        }
        let x = Array2::from_shape_vec((c.state_dim, 1), state.to_vec()).expect("column");
        let out = batch::values(&c.actor.spec, &c.actor.params, x.view());
        let d = c.action.dim();
        Ok(match c.kind {
            AgentKind::Td3 => out.column(0).to_vec(),
            AgentKind::Sac => (0..d).map(|j| out[[j, 0]].tanh()).collect(),
        })
    }

    pub fn normalizer(&self) -> Option<&RunningStats> {
        self.checkpoint.normalizer.as_ref()
    }
}
