use std::path::Path;

use rand::Rng;

use super::{HarnessError, LyapunovConfig, PinnConfig, Record};
use crate::lyapunov::{ClosedLoop, LevelSetTrainer, RoaGrid, SafeCellValues};
use crate::nn::{init_params, AdamConfig, AdamState, LyapunovNet, MlpSpec};
use crate::par::Exec;
use crate::pde::{pinn_loss, sample_boundary, sample_interior, solution_error, CollocationSet, PdeProblem};
use crate::rl::{
    lyapunov_state, pinn_state, reward_lyapunov, reward_pinn, ActionSpec, Agent, AgentConfig, AgentKind, Policy,
    ReplayBuffer, RunningStats, Transition, DIVERGENCE_REWARD,
};
use crate::samplers::{compose_mixture, residual_summary, RatioVector, SamplerBank, SamplerId, N_SAMPLERS};
use crate::seed;

/// An agent being trained, with its replay buffer and state normalizer.
#[derive(Clone, Debug)]
pub struct Learner {
    pub agent: Agent,
    pub buffer: ReplayBuffer,
    /// Running statistics of the PINN residual state; unused for Lyapunov.
    pub stats: RunningStats,
    pub action: ActionSpec,
    pub transitions: u64,
    pub updates: u64,
    warmup: usize,
    updates_per_step: usize,
    rng: seed::Rng,
}

impl Learner {
    pub fn new(
        kind: AgentKind,
        state_dim: usize,
        action: ActionSpec,
        config: AgentConfig,
        warmup: usize,
        updates_per_step: usize,
        seed: u64,
    ) -> Self {
        let mut rng = seed::stream(seed, "agent", 0);
        let buffer = ReplayBuffer::new(config.buffer);
        let agent = Agent::new(kind, state_dim, action.dim(), config, &mut rng);
        Self {
            agent,
            buffer,
            stats: RunningStats::new(N_SAMPLERS),
            action,
            transitions: 0,
            updates: 0,
            warmup,
            updates_per_step,
            rng,
        }
    }

    /// Exploratory raw action; uniform on `[−1, 1]^d` during warm-up.
    pub fn act(&mut self, state: &[f64]) -> Vec<f64> {
        if self.transitions < self.warmup as u64 {
            (0..self.action.dim()).map(|_| self.rng.random_range(-1.0..=1.0)).collect()
        } else {
            self.agent.act(state, true, &mut self.rng)
        }
    }

    /// Stores the transition and runs the configured number of updates.
    pub fn observe(&mut self, t: Transition) -> Result<(), HarnessError> {
        self.buffer.push(t);
        self.transitions += 1;
        for _ in 0..self.updates_per_step {
            if let crate::rl::UpdateOutcome::Updated { .. } = self.agent.update(&self.buffer, &mut self.rng)? {
                self.updates += 1;
            }
        }
        Ok(())
    }
}

/// Where an episode's actions come from.
pub enum Control<'a, A> {
    /// A fixed environment action (baselines).
    Fixed(A),
    /// A frozen deterministic policy (evaluation).
    Policy(&'a Policy),
    /// An agent that explores and learns from every transition.
    Learn(&'a mut Learner),
    /// Any function of the state returning a raw action.
    Func(&'a mut dyn FnMut(&[f64]) -> Vec<f64>),
}

impl<A: Clone> Control<'_, A> {
    fn raw(&mut self, state: &[f64]) -> Result<Option<Vec<f64>>, HarnessError> {
        Ok(match self {
            Control::Fixed(_) => None,
            Control::Policy(p) => Some(p.act(state)?),
            Control::Learn(l) => Some(l.act(state)),
            Control::Func(f) => Some(f(state)),
        })
    }

    fn decide(&mut self, state: &[f64], map: impl Fn(&[f64]) -> A) -> Result<(Option<Vec<f64>>, A), HarnessError> {
        if let Control::Fixed(a) = self {
            return Ok((None, a.clone()));
        }
        let raw = self.raw(state)?.expect("non-fixed control yields an action");
        let a = map(&raw);
        Ok((Some(raw), a))
    }

    fn observe(&mut self, t: Transition) -> Result<(), HarnessError> {
        if let Control::Learn(l) = self {
            l.observe(t)?;
        }
        Ok(())
    }
}

/// Outcome of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub records: Vec<Record>,
    pub total_reward: f64,
    /// The inner training diverged and the episode ended early.
    pub diverged: bool,
    /// Safe-set fraction (Lyapunov) or testing PINN error at the last step.
    pub final_metric: f64,
    /// Safe-sample ratio per step (Lyapunov only).
    pub safe_ratios: Vec<f64>,
}

/// Transition whose next state is only known one step later.
struct Pending {
    s: Vec<f64>,
    a: Vec<f64>,
    r: f64,
}

impl Pending {
    fn close<A: Clone>(self, control: &mut Control<'_, A>, s_next: Vec<f64>, done: bool) -> Result<(), HarnessError> {
        control.observe(Transition { s: self.s, a: self.a, r: self.r, s_next, done })
    }
}

/// Ground-truth grid for a pole length, cached under `cache` when given.
pub fn roa_grid(cfg: &LyapunovConfig, length: f64, cache: Option<&Path>, exec: Exec) -> Result<RoaGrid, HarnessError> {
    let system = ClosedLoop::lqr(cfg.pendulum.with_length(length))?;
    Ok(RoaGrid::load_or_compute(cache, &system, &cfg.level_set.bounds, cfg.grid_resolution, cfg.grid_horizon, exec)?)
}

/// Level-set expansion with the multiplier chosen by `control` at every
/// resample step. `grid` must belong to the pendulum of length `length`.
pub fn run_lyapunov_episode(
    cfg: &LyapunovConfig,
    length: f64,
    grid: &RoaGrid,
    seed: u64,
    mut control: Control<'_, f64>,
    exec: Exec,
) -> Result<EpisodeLog, HarnessError> {
    let spec = ActionSpec::alpha();
    let system = ClosedLoop::lqr(cfg.pendulum.with_length(length))?;
    if grid.system != system {
        return Err(HarnessError::Mismatch(format!("ground-truth grid is not for pole length {length}")));
    }
    let net = LyapunovNet::init(seed::child_seed(seed, "lyapunov/net", 0));
    let mut trainer = LevelSetTrainer::new(system, net, cfg.level_set.clone(), exec)?;
    let mut rng = seed::stream(seed, "lyapunov/episode", 0);
    let steps = cfg.resample_steps;
    let per_step = cfg.level_set.inner_iters;

    let mut fraction = SafeCellValues::new(&trainer.net, grid, exec).fraction(trainer.state.c);
    // The initial level is certified by simulation, so the opening state
    // reports an all-safe batch.
    let mut state = lyapunov_state(1.0, 0, steps, trainer.c0, trainer.c0);
    let mut log = EpisodeLog { records: Vec::new(), total_reward: 0.0, diverged: false, final_metric: fraction, safe_ratios: Vec::new() };
    for k in 0..steps {
        let step = k + 1;
        let (raw, alpha) = control.decide(&state, |raw| spec.to_alpha(raw))?;
        let report = trainer.resample_step(alpha, &mut rng, exec).map_err(|e| HarnessError::at(step, e))?;
        let after = SafeCellValues::new(&trainer.net, grid, exec).fraction(trainer.state.c);
        let reward = reward_lyapunov(fraction, after);
        fraction = after;
        let next = lyapunov_state(report.safe_ratio, step, steps, trainer.state.c, trainer.c0);
        if let Some(a) = raw {
            Pending { s: state, a, r: reward }.close(&mut control, next.clone(), step == steps)?;
        }
        state = next;

        let iter = step * per_step;
        log.records.extend([
            Record::new(step, iter, "safe_set_fraction", after),
            Record::new(step, iter, "safe_ratio", report.safe_ratio),
            Record::new(step, iter, "alpha", alpha),
            Record::new(step, iter, "level", report.level),
            Record::new(step, iter, "reward", reward),
        ]);
        log.total_reward += reward;
        log.safe_ratios.push(report.safe_ratio);
        log.final_metric = after;
    }
    Ok(log)
}

/// PINN training on `problem` with the sampler mixture chosen by `control`
/// at every resample step. The residual state is normalized with the
/// learner's running statistics (updated as it goes), the policy's frozen
/// statistics, or identity statistics for the other controls.
pub fn run_pinn_episode(
    cfg: &PinnConfig,
    problem: &PdeProblem,
    seed: u64,
    mut control: Control<'_, RatioVector>,
) -> Result<EpisodeLog, HarnessError> {
    let spec = ActionSpec::simplex();
    let net = MlpSpec::pinn();
    let mut params = init_params(&net, seed::child_seed(seed, "pinn/net", 0));
    let mut adam = AdamState::new(params.len(), AdamConfig::with_lr(cfg.lr));
    let mut bank = SamplerBank::new(cfg.rad, cfg.restart_streams);
    let mut rng = seed::stream(seed, "pinn/episode", 0);
    let mut frozen = match &control {
        Control::Policy(p) => p.normalizer().cloned().unwrap_or_else(|| RunningStats::new(N_SAMPLERS)),
        _ => RunningStats::new(N_SAMPLERS),
    };
    let steps = cfg.resample_steps();

    let mut log = EpisodeLog { records: Vec::new(), total_reward: 0.0, diverged: false, final_metric: f64::NAN, safe_ratios: Vec::new() };
    let mut pending: Option<Pending> = None;
    for i in 0..steps {
        let step = i + 1;
        let at = |e: crate::Error| HarnessError::at(step, e);
        let mut pools: [Vec<[f64; 2]>; N_SAMPLERS] = Default::default();
        let mut res = [0.0; N_SAMPLERS];
        for id in SamplerId::ALL {
            let pts = bank.sample(id, problem, cfg.collocation, Some((&net, &params)), &mut rng).map_err(|e| at(e.into()))?;
            res[id.index()] = residual_summary(problem, &net, &params, &pts).map_err(|e| at(e.into()))?;
            pools[id.index()] = pts;
        }
        let state = match &mut control {
            Control::Learn(l) => pinn_state(&res, &mut l.stats, i, steps, true),
            _ => pinn_state(&res, &mut frozen, i, steps, false),
        };
        if let Some(p) = pending.take() {
            p.close(&mut control, state.clone(), false)?;
        }
        let (raw, ratios) = control.decide(&state, |raw| spec.to_ratios(raw))?;
        let interior = compose_mixture(&ratios, &pools, cfg.collocation, &mut rng).map_err(|e| at(e.into()))?;
        let colloc = CollocationSet { interior, boundary: sample_boundary(problem, cfg.boundary, &mut rng) };

        let mut diverged = false;
        for _ in 0..cfg.cadence {
            let loss = pinn_loss(problem, &net, &params, &colloc).map_err(|e| at(e.into()))?;
            let grad = loss.grad.expect("pinn_loss returns a gradient");
            if !loss.total.is_finite() || adam.step(&mut params, &grad).is_err() || params.iter().any(|p| !p.is_finite()) {
                diverged = true;
                break;
            }
        }
        let iter = step * cfg.cadence;
        if diverged {
            log::warn!("inner PINN training diverged at resample step {step}; ending the episode");
            if let Some(a) = raw {
                Pending { s: state.clone(), a, r: DIVERGENCE_REWARD }.close(&mut control, state, true)?;
            }
            log.records.push(Record::new(step, iter, "reward", DIVERGENCE_REWARD));
            log.total_reward += DIVERGENCE_REWARD;
            log.diverged = true;
            log.final_metric = f64::NAN;
            return Ok(log);
        }

        let train_residual = residual_summary(problem, &net, &params, &colloc.interior).map_err(|e| at(e.into()))?;
        let test = sample_interior(&problem.domain, cfg.test_points, &mut rng);
        let error = solution_error(problem, &net, &params, &test).map_err(|e| at(e.into()))?;
        let reward = reward_pinn(error);
        if let Some(a) = raw {
            pending = Some(Pending { s: state, a, r: reward });
        }

        log.records.push(Record::new(step, iter, "pde_residual", train_residual));
        log.records.push(Record::new(step, iter, "pinn_error", error));
        for (j, r) in ratios.as_array().iter().enumerate() {
            log.records.push(Record::new(step, iter, format!("ratio_{}", j + 1), *r));
        }
        log.records.push(Record::new(step, iter, "reward", reward));
        log.total_reward += reward;
        log.final_metric = error;
    }
    if let Some(p) = pending.take() {
        // Terminal: the next state is never used by the critic target.
        let s_next = p.s.clone();
        p.close(&mut control, s_next, true)?;
    }
    Ok(log)
}
