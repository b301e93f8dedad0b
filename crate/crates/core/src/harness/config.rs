use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::lyapunov::{LevelSetConfig, PendulumParams};
use crate::pde::{make_problem, PdeEnv, ReferenceBudget};
use crate::rl::{ActionSpec, AgentConfig, AgentKind};
use crate::samplers::{RadConfig, RatioVector, SamplerId};

/// Which inner problem a run trains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvId {
    Lyapunov,
    Diffusion,
    Wave,
    Burgers,
}

impl EnvId {
    pub fn name(self) -> &'static str {
        match self {
            EnvId::Lyapunov => "lyapunov",
            EnvId::Diffusion => "diffusion",
            EnvId::Wave => "wave",
            EnvId::Burgers => "burgers",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [EnvId::Lyapunov, EnvId::Diffusion, EnvId::Wave, EnvId::Burgers].into_iter().find(|e| e.name() == name)
    }

    pub fn pde(self) -> Option<PdeEnv> {
        match self {
            EnvId::Lyapunov => None,
            EnvId::Diffusion => Some(PdeEnv::Diffusion),
            EnvId::Wave => Some(PdeEnv::Wave),
            EnvId::Burgers => Some(PdeEnv::Burgers),
        }
    }

    pub fn action_spec(self) -> ActionSpec {
        match self {
            EnvId::Lyapunov => ActionSpec::alpha(),
            _ => ActionSpec::simplex(),
        }
    }

    pub fn state_dim(self) -> usize {
        match self {
            EnvId::Lyapunov => crate::rl::LYAPUNOV_STATE_DIM,
            _ => crate::rl::PINN_STATE_DIM,
        }
    }

    /// Desk-scale episode budget used when `train.episodes` is unset.
    pub fn default_episodes(self) -> usize {
        match self {
            EnvId::Lyapunov => 300,
            _ => 500,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentChoice {
    Td3,
    Sac,
    None,
}

impl AgentChoice {
    pub fn kind(self) -> Option<AgentKind> {
        match self {
            AgentChoice::Td3 => Some(AgentKind::Td3),
            AgentChoice::Sac => Some(AgentKind::Sac),
            AgentChoice::None => None,
        }
    }
}

/// Distribution of the per-episode randomization parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamDist {
    Uniform { lo: f64, hi: f64 },
    Choice { values: Vec<f64> },
}

impl ParamDist {
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ParamDist::Uniform { lo, hi } if lo == hi => *lo,
            ParamDist::Uniform { lo, hi } => rng.random_range(*lo..*hi),
            ParamDist::Choice { values } => values[rng.random_range(0..values.len())],
        }
    }

    fn values_to_check(&self) -> Vec<f64> {
        match self {
            ParamDist::Uniform { lo, hi } => vec![*lo, *hi],
            ParamDist::Choice { values } => values.clone(),
        }
    }

    fn validate(&self, field: &str) -> Result<(), HarnessError> {
        match self {
            ParamDist::Uniform { lo, hi } if !(lo <= hi && lo.is_finite() && hi.is_finite()) => {
                Err(HarnessError::config(field, format!("need finite lo <= hi, got [{lo}, {hi}]")))
            }
            ParamDist::Choice { values } if values.is_empty() => Err(HarnessError::config(field, "empty choice list")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Seed of the agent and of the training episode stream.
    pub seed: u64,
    /// Episode budget; unset means the environment's desk-scale default.
    pub episodes: Option<usize>,
    /// Transitions collected with uniformly random actions before the
    /// policy takes over.
    pub warmup: usize,
    pub updates_per_step: usize,
    /// Evaluate a policy snapshot every this many episodes; 0 disables.
    pub eval_every_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { seed: 0, episodes: None, warmup: 256, updates_per_step: 1, eval_every_episodes: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PinnConfig {
    /// Inner Adam iterations per episode.
    pub iterations: usize,
    /// Iterations between collocation resamples.
    pub cadence: usize,
    /// Interior collocation points per resample.
    pub collocation: usize,
    /// Boundary and initial-condition points per resample.
    pub boundary: usize,
    pub lr: f64,
    /// Fresh uniform points for the testing error.
    pub test_points: usize,
    /// Training distribution of z; unset means the environment default.
    pub z_train: Option<ParamDist>,
    /// Held-out z shared by evaluation and baselines; unset means the
    /// environment default.
    pub z_test: Option<f64>,
    pub rad: RadConfig,
    /// Restart the Sobol and Halton streams on every resample.
    pub restart_streams: bool,
    /// Budget and seed of reference networks for problems without a closed
    /// form.
    pub reference: ReferenceBudget,
    pub reference_seed: u64,
}

impl Default for PinnConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            cadence: 1_000,
            collocation: 50,
            boundary: 50,
            lr: 1e-3,
            test_points: 1_000,
            z_train: None,
            z_test: None,
            rad: RadConfig::default(),
            restart_streams: false,
            reference: ReferenceBudget::default(),
            reference_seed: 0,
        }
    }
}

impl PinnConfig {
    pub fn resample_steps(&self) -> usize {
        self.iterations / self.cadence
    }

    pub fn z_train_for(&self, env: PdeEnv) -> ParamDist {
        self.z_train.clone().unwrap_or(match env {
            PdeEnv::Diffusion => ParamDist::Uniform { lo: 1.0, hi: 3.0 },
            PdeEnv::Wave => ParamDist::Choice { values: vec![1.0, 2.0] },
            // Each Burgers value needs a trained reference, so training
            // draws from a fixed set.
            PdeEnv::Burgers => ParamDist::Choice { values: vec![0.005, 0.01, 0.02, 0.05] },
        })
    }

    pub fn z_test_for(&self, env: PdeEnv) -> f64 {
        self.z_test.unwrap_or(match env {
            PdeEnv::Diffusion => 2.0,
            PdeEnv::Wave => 2.0,
            PdeEnv::Burgers => 0.01 / std::f64::consts::PI,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovConfig {
    pub resample_steps: usize,
    /// Pendulum at the nominal length; other lengths rescale the torque
    /// limit proportionally.
    pub pendulum: PendulumParams,
    pub length_train: ParamDist,
    pub length_test: f64,
    pub level_set: LevelSetConfig,
    pub grid_resolution: usize,
    pub grid_horizon: usize,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            resample_steps: 10,
            pendulum: PendulumParams::default(),
            length_train: ParamDist::Uniform { lo: 0.35, hi: 0.65 },
            length_test: 0.5,
            level_set: LevelSetConfig::default(),
            grid_resolution: 101,
            grid_horizon: 2_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    /// Fixed expansion multipliers for the Lyapunov sweep.
    pub alphas: Vec<f64>,
    /// Sampler baselines: base sampler names or `uniform` for the uniform
    /// mixture.
    pub selectors: Vec<String>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        let mut selectors: Vec<String> = SamplerId::ALL.iter().map(|s| s.name().to_string()).collect();
        selectors.push(UNIFORM_SELECTOR.into());
        Self { alphas: (11..=20).map(|i| f64::from(i) / 10.0).collect(), selectors }
    }
}

pub const UNIFORM_SELECTOR: &str = "uniform";

/// Mixture for a named sampler baseline.
pub fn selector_ratios(name: &str) -> Option<RatioVector> {
    if name == UNIFORM_SELECTOR {
        return Some(RatioVector::uniform());
    }
    SamplerId::from_name(name).map(RatioVector::one_hot)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub run_id: String,
    pub env: EnvId,
    /// Evaluation and baseline seeds.
    pub seeds: Vec<u64>,
    pub agent: AgentChoice,
    pub train: TrainConfig,
    pub rl: AgentConfig,
    pub pinn: PinnConfig,
    pub lyapunov: LyapunovConfig,
    pub baseline: BaselineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            run_id: "run".into(),
            env: EnvId::Diffusion,
            seeds: (0..5).collect(),
            agent: AgentChoice::Td3,
            train: TrainConfig::default(),
            rl: AgentConfig::default(),
            pinn: PinnConfig::default(),
            lyapunov: LyapunovConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

fn positive(field: &str, v: usize) -> Result<(), HarnessError> {
    if v == 0 {
        return Err(HarnessError::config(field, "must be positive"));
    }
    Ok(())
}

fn positive_real(field: &str, v: f64) -> Result<(), HarnessError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(HarnessError::config(field, format!("must be a positive number, got {v}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn episodes(&self) -> usize {
        self.train.episodes.unwrap_or(self.env.default_episodes())
    }

    pub fn resample_steps(&self) -> usize {
        match self.env {
            EnvId::Lyapunov => self.lyapunov.resample_steps,
            _ => self.pinn.resample_steps(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.run_id.is_empty() || self.run_id.contains([',', '"', '\n', '\r']) {
            return Err(HarnessError::config("run_id", "must be nonempty without commas, quotes or newlines"));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::config("seeds", "need at least one seed"));
        }
        positive("train.updates_per_step", self.train.updates_per_step)?;

        let rl = &self.rl;
        positive("rl.batch", rl.batch)?;
        if rl.buffer < rl.batch {
            return Err(HarnessError::config("rl.buffer", "must hold at least one minibatch"));
        }
        if rl.hidden.is_empty() || rl.hidden.contains(&0) {
            return Err(HarnessError::config("rl.hidden", "need at least one positive layer width"));
        }
        if !(0.0..=1.0).contains(&rl.gamma) {
            return Err(HarnessError::config("rl.gamma", "must lie in [0, 1]"));
        }
        if !(rl.tau > 0.0 && rl.tau <= 1.0) {
            return Err(HarnessError::config("rl.tau", "must lie in (0, 1]"));
        }
        positive_real("rl.lr", rl.lr)?;
        positive_real("rl.final_bound", rl.final_bound)?;
        positive("rl.policy_delay", rl.policy_delay)?;

        let p = &self.pinn;
        positive("pinn.iterations", p.iterations)?;
        positive("pinn.cadence", p.cadence)?;
        if p.iterations % p.cadence != 0 {
            return Err(HarnessError::config("pinn.cadence", "must divide pinn.iterations"));
        }
        positive("pinn.collocation", p.collocation)?;
        positive("pinn.boundary", p.boundary)?;
        positive("pinn.test_points", p.test_points)?;
        positive_real("pinn.lr", p.lr)?;
        positive("pinn.rad.pool", p.rad.pool)?;
        if p.rad.pool < p.collocation {
            return Err(HarnessError::config("pinn.rad.pool", "must be at least pinn.collocation"));
        }
        if let Some(env) = self.env.pde() {
            let z_train = p.z_train_for(env);
            z_train.validate("pinn.z_train")?;
            for z in z_train.values_to_check().into_iter().chain([p.z_test_for(env)]) {
                make_problem(env, z).map_err(|e| HarnessError::config("pinn.z", e.to_string()))?;
            }
        }

        let l = &self.lyapunov;
        positive("lyapunov.resample_steps", l.resample_steps)?;
        l.pendulum.validate().map_err(|e| HarnessError::config("lyapunov.pendulum", e.to_string()))?;
        l.length_train.validate("lyapunov.length_train")?;
        for len in l.length_train.values_to_check().into_iter().chain([l.length_test]) {
            positive_real("lyapunov.length", len)?;
        }
        let ls = &l.level_set;
        positive("lyapunov.level_set.batch", ls.batch)?;
        positive("lyapunov.level_set.horizon", ls.horizon)?;
        positive("lyapunov.level_set.inner_iters", ls.inner_iters)?;
        positive("lyapunov.level_set.steps_per_iter", ls.steps_per_iter)?;
        positive_real("lyapunov.level_set.lr", ls.lr)?;
        if l.grid_resolution < 2 {
            return Err(HarnessError::config("lyapunov.grid_resolution", "must be at least 2"));
        }
        positive("lyapunov.grid_horizon", l.grid_horizon)?;

        let ActionSpec::Alpha { lo, hi } = ActionSpec::alpha() else { unreachable!() };
        for a in &self.baseline.alphas {
            if !(lo..=hi).contains(a) {
                return Err(HarnessError::config("baseline.alphas", format!("{a} is outside [{lo}, {hi}]")));
            }
        }
        for s in &self.baseline.selectors {
            if selector_ratios(s).is_none() {
                return Err(HarnessError::config("baseline.selectors", format!("unknown selector `{s}`")));
            }
        }
        Ok(())
    }
}
