use std::io::Write;
use std::path::PathBuf;

use super::episode::{roa_grid, run_lyapunov_episode, run_pinn_episode, Control, EpisodeLog, Learner};
use super::{selector_ratios, EnvId, ExperimentConfig, HarnessError, MetricsWriter, Record};
use crate::lyapunov::RoaGrid;
use crate::par::Exec;
use crate::pde::{load_or_train_reference, make_problem, train_reference, PdeEnv, PdeProblem};
use crate::rl::{PolicyCheckpoint, POLICY_VERSION};
use crate::seed;

/// Where runs keep caches and how they schedule work.
#[derive(Clone, Debug, Default)]
pub struct RunContext {
    /// Cache for ground-truth grids and reference networks; `None` recomputes.
    pub cache: Option<PathBuf>,
    pub exec: Exec,
}

impl RunContext {
    /// PDE instance for `z`, with a reference network attached when the
    /// problem has no closed form.
    pub fn pde_problem(&self, config: &ExperimentConfig, env: PdeEnv, z: f64) -> Result<PdeProblem, HarnessError> {
        let problem = make_problem(env, z)?;
        if problem.has_closed_form() {
            return Ok(problem);
        }
        let (budget, seed) = (&config.pinn.reference, config.pinn.reference_seed);
        Ok(match &self.cache {
            Some(dir) => load_or_train_reference(&problem, budget, seed, dir)?,
            None => {
                let trained = train_reference(&problem, budget, seed)?;
                problem.with_reference(trained.checkpoint)
            }
        })
    }

    pub fn test_grid(&self, config: &ExperimentConfig) -> Result<RoaGrid, HarnessError> {
        roa_grid(&config.lyapunov, config.lyapunov.length_test, self.cache.as_deref(), self.exec)
    }
}

/// Run id under which a run's sub-streams are written.
pub fn sub_run(config: &ExperimentConfig, part: &str) -> String {
    format!("{}/{part}", config.run_id)
}

/// Fixed environment action for an evaluation-style episode batch.
#[derive(Clone, Debug, PartialEq)]
pub enum Selection<'a> {
    Alpha(f64),
    Sampler(&'a str),
    Policy(&'a PolicyCheckpoint),
}

/// One episode per evaluation seed at the held-out parameter, in seed order.
pub fn run_seeds(config: &ExperimentConfig, selection: &Selection<'_>, ctx: &RunContext) -> Result<Vec<EpisodeLog>, HarnessError> {
    let policy = match selection {
        Selection::Policy(cp) => Some(cp.policy()),
        _ => None,
    };
    let results = match config.env.pde() {
        None => {
            let grid = ctx.test_grid(config)?;
            let len = config.lyapunov.length_test;
            ctx.exec.map(&config.seeds, |&s| {
                let control = match (selection, &policy) {
                    (Selection::Alpha(a), _) => Control::Fixed(*a),
                    (Selection::Policy(_), Some(p)) => Control::Policy(p),
                    _ => return Err(HarnessError::Mismatch("Lyapunov runs take a multiplier or a policy".into())),
                };
                run_lyapunov_episode(&config.lyapunov, len, &grid, s, control, ctx.exec)
            })
        }
        Some(env) => {
            let problem = ctx.pde_problem(config, env, config.pinn.z_test_for(env))?;
            ctx.exec.map(&config.seeds, |&s| {
                let control = match (selection, &policy) {
                    (Selection::Sampler(name), _) => Control::Fixed(
                        selector_ratios(name).ok_or_else(|| HarnessError::config("selector", format!("unknown selector `{name}`")))?,
                    ),
                    (Selection::Policy(_), Some(p)) => Control::Policy(p),
                    _ => return Err(HarnessError::Mismatch("PINN runs take a sampler selector or a policy".into())),
                };
                run_pinn_episode(&config.pinn, &problem, s, control)
            })
        }
    };
    results.into_iter().collect()
}

fn write_seed_logs<W: Write>(
    sink: &mut MetricsWriter<W>,
    run_id: &str,
    seeds: &[u64],
    episode: usize,
    logs: &[EpisodeLog],
) -> Result<(), HarnessError> {
    for (s, log) in seeds.iter().zip(logs) {
        sink.write_records(run_id, *s, episode, log.records.clone())?;
    }
    Ok(())
}

/// Checks that a checkpoint was trained for this environment.
pub fn check_checkpoint(config: &ExperimentConfig, checkpoint: &PolicyCheckpoint) -> Result<(), HarnessError> {
    if checkpoint.version != POLICY_VERSION {
        return Err(HarnessError::Mismatch(format!("policy version {} (expected {POLICY_VERSION})", checkpoint.version)));
    }
    if checkpoint.action != config.env.action_spec() || checkpoint.state_dim != config.env.state_dim() {
        return Err(HarnessError::Mismatch(format!("policy was not trained for the {} environment", config.env.name())));
    }
    Ok(())
}

/// Frozen-policy evaluation over the configured seeds. Rows go to
/// `{run_id}/eval` with the checkpoint's episode count.
pub fn evaluate<W: Write>(
    config: &ExperimentConfig,
    checkpoint: &PolicyCheckpoint,
    ctx: &RunContext,
    sink: &mut MetricsWriter<W>,
) -> Result<Vec<EpisodeLog>, HarnessError> {
    config.validate()?;
    check_checkpoint(config, checkpoint)?;
    let logs = run_seeds(config, &Selection::Policy(checkpoint), ctx)?;
    write_seed_logs(sink, &sub_run(config, "eval"), &config.seeds, checkpoint.episodes, &logs)?;
    Ok(logs)
}

/// Fixed-α sweep (Lyapunov) or sampler baselines (PINN). `only` restricts
/// the run to one multiplier or selector name. Returns `(name, logs)` per
/// baseline, rows going to `{run_id}/{name}`.
pub fn baselines<W: Write>(
    config: &ExperimentConfig,
    only: Option<&str>,
    ctx: &RunContext,
    sink: &mut MetricsWriter<W>,
) -> Result<Vec<(String, Vec<EpisodeLog>)>, HarnessError> {
    config.validate()?;
    let mut out = Vec::new();
    match config.env {
        EnvId::Lyapunov => {
            let alphas = match only {
                None => config.baseline.alphas.clone(),
                Some(text) => {
                    let a: f64 = text
                        .parse()
                        .map_err(|_| HarnessError::config("selector", format!("`{text}` is not a multiplier")))?;
                    let probe = ExperimentConfig {
                        baseline: super::BaselineConfig { alphas: vec![a], ..config.baseline.clone() },
                        ..config.clone()
                    };
                    probe.validate()?;
                    vec![a]
                }
            };
            for a in alphas {
                let name = format!("alpha_{a}");
                log::info!("baseline {name}");
                let logs = run_seeds(config, &Selection::Alpha(a), ctx)?;
                write_seed_logs(sink, &sub_run(config, &name), &config.seeds, 0, &logs)?;
                out.push((name, logs));
            }
        }
        _ => {
            let names = match only {
                None => config.baseline.selectors.clone(),
                Some(name) if selector_ratios(name).is_some() => vec![name.to_string()],
                Some(name) => return Err(HarnessError::config("selector", format!("unknown selector `{name}`"))),
            };
            for name in names {
                log::info!("baseline {name}");
                let logs = run_seeds(config, &Selection::Sampler(&name), ctx)?;
                write_seed_logs(sink, &sub_run(config, &name), &config.seeds, 0, &logs)?;
                out.push((name, logs));
            }
        }
    }
    Ok(out)
}

/// Trains the configured agent for `config.episodes()` episodes with a
/// fresh randomization parameter per episode. Training rows go to
/// `{run_id}/train`; policy snapshots every `train.eval_every_episodes`
/// episodes are evaluated into `{run_id}/eval`. Zero episodes returns the
/// untrained policy.
pub fn train_agent<W: Write>(
    config: &ExperimentConfig,
    ctx: &RunContext,
    sink: &mut MetricsWriter<W>,
) -> Result<PolicyCheckpoint, HarnessError> {
    config.validate()?;
    let kind = config.agent.kind().ok_or_else(|| HarnessError::config("agent", "training needs td3 or sac"))?;
    let env = config.env;
    let action = env.action_spec();
    let t = &config.train;
    let mut learner = Learner::new(kind, env.state_dim(), action, config.rl.clone(), t.warmup, t.updates_per_step, t.seed);
    let snapshot = |learner: &Learner, episodes: usize| {
        let stats = env.pde().map(|_| learner.stats.clone());
        PolicyCheckpoint::from_agent(&learner.agent, action, stats, episodes)
    };
    let episodes = config.episodes();
    let train_run = sub_run(config, "train");
    for e in 0..episodes {
        let ep_seed = seed::child_seed(t.seed, "train/episode", e as u64);
        let mut prng = seed::stream(t.seed, "train/param", e as u64);
        let (param_name, param, log) = match env.pde() {
            None => {
                let len = config.lyapunov.length_train.sample(&mut prng);
                let grid = roa_grid(&config.lyapunov, len, None, ctx.exec)?;
                let log = run_lyapunov_episode(&config.lyapunov, len, &grid, ep_seed, Control::Learn(&mut learner), ctx.exec)?;
                ("length", len, log)
            }
            Some(pde) => {
                let z = config.pinn.z_train_for(pde).sample(&mut prng);
                let problem = ctx.pde_problem(config, pde, z)?;
                ("z", z, run_pinn_episode(&config.pinn, &problem, ep_seed, Control::Learn(&mut learner))?)
            }
        };
        log::info!(
            "episode {}/{episodes}: {param_name} = {param:.4}, return {:.4}, final {:.4e}, updates {}",
            e + 1,
            log.total_reward,
            log.final_metric,
            learner.updates
        );
        let mut records = vec![Record::new(0, 0, param_name, param)];
        records.extend(log.records);
        sink.write_records(&train_run, t.seed, e, records)?;

        if t.eval_every_episodes > 0 && (e + 1) % t.eval_every_episodes == 0 {
            evaluate(config, &snapshot(&learner, e + 1), ctx, sink)?;
        }
    }
    Ok(snapshot(&learner, episodes))
}

/// Median of finite values; NaN when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
