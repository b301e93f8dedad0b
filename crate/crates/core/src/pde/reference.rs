use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{pinn_loss, residuals, BoundaryPoint, CollocationSet};
use super::{sample_boundary, sample_interior, PdeError, PdeProblem};
use crate::nn::{init_params, AdamConfig, AdamState, MlpSpec, NetCheckpoint, NnError};
use crate::par::Exec;
use crate::seed;

/// Budget for a long-run reference PINN.
///
/// The dense collocation pools are fixed for the whole run; each Adam step
/// uses a uniform minibatch drawn from them, with the boundary term
/// reweighted so the minibatch loss is proportional to the dense one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceBudget {
    pub steps: usize,
    pub interior_pool: usize,
    pub boundary_pool: usize,
    pub batch_interior: usize,
    pub batch_boundary: usize,
    pub lr: f64,
}

impl Default for ReferenceBudget {
    fn default() -> Self {
        Self { steps: 60_000, interior_pool: 10_000, boundary_pool: 400, batch_interior: 500, batch_boundary: 100, lr: 1e-3 }
    }
}

impl ReferenceBudget {
    /// Step decay: ×0.1 after 70% of the steps, ×0.01 after 90%.
    fn lr_at(&self, step: usize) -> f64 {
        if step * 10 >= self.steps * 9 {
            self.lr * 1e-2
        } else if step * 10 >= self.steps * 7 {
            self.lr * 1e-1
        } else {
            self.lr
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedReference {
    pub checkpoint: NetCheckpoint,
    /// Residual RMS over the training interior pool.
    pub train_residual_rms: f64,
}

/// RMS of the interior residual of `params` at `points`.
pub fn residual_rms(problem: &PdeProblem, spec: &MlpSpec, params: &[f64], points: &[[f64; 2]]) -> f64 {
    let r = residuals(problem, spec, params, points, Exec::default());
    (r.iter().map(|v| v * v).sum::<f64>() / r.len().max(1) as f64).sqrt()
}

/// Trains a high-accuracy PINN for `problem`, typically one without a
/// closed form.
pub fn train_reference(problem: &PdeProblem, budget: &ReferenceBudget, seed: u64) -> Result<TrainedReference, PdeError> {
    let spec = MlpSpec::pinn();
    let mut params = init_params(&spec, seed::child_seed(seed, "reference-init", 0));
    let mut rng = seed::stream(seed, "reference", 0);
    let interior = sample_interior(&problem.domain, budget.interior_pool, &mut rng);
    let boundary = sample_boundary(problem, budget.boundary_pool, &mut rng);
    if interior.is_empty() {
        return Err(PdeError::EmptyCollocation);
    }

    let scale = (budget.boundary_pool as f64 / budget.interior_pool as f64)
        * (budget.batch_interior as f64 / budget.batch_boundary.max(1) as f64);
    let batch_problem = problem.clone().with_boundary_weight(problem.boundary_weight * scale);
    let mut adam = AdamState::new(spec.n_params(), AdamConfig::with_lr(budget.lr));
    let diverged = |step: usize, detail: String| PdeError::Diverged {
        pde: problem.name(),
        z: problem.z(),
        seed,
        step,
        detail,
    };

    for step in 0..budget.steps {
        let set = CollocationSet {
            interior: (0..budget.batch_interior).map(|_| interior[rng.random_range(0..interior.len())]).collect(),
            boundary: if boundary.is_empty() {
                Vec::new()
            } else {
                (0..budget.batch_boundary).map(|_| boundary[rng.random_range(0..boundary.len())]).collect::<Vec<BoundaryPoint>>()
            },
        };
        let loss = pinn_loss(&batch_problem, &spec, &params, &set)?;
        if !loss.total.is_finite() {
            return Err(diverged(step, format!("loss {}", loss.total)));
        }
        adam.config.lr = budget.lr_at(step);
        match adam.step(&mut params, loss.grad.as_deref().unwrap_or_default()) {
            Ok(()) => {}
            Err(e @ NnError::NonFiniteGradient { .. }) => return Err(diverged(step, e.to_string())),
            Err(e) => return Err(e.into()),
        }
        if step % 5000 == 0 {
            log::debug!("reference {} z={} step {step}: loss {:.3e}", problem.name(), problem.z(), loss.total);
        }
    }

    let train_residual_rms = residual_rms(problem, &spec, &params, &interior);
    Ok(TrainedReference { checkpoint: NetCheckpoint::new(spec, params)?, train_residual_rms })
}

/// Cache file for the reference of `problem` trained with `seed` and
/// `budget.steps` steps.
pub fn reference_path(dir: &Path, problem: &PdeProblem, budget: &ReferenceBudget, seed: u64) -> PathBuf {
    dir.join(format!("{}_z{}_seed{}_steps{}.json", problem.name(), problem.z(), seed, budget.steps))
}

/// Returns `problem` with a reference attached, loading it from `dir` when
/// cached and training (then caching) it otherwise. Problems with a closed
/// form are returned unchanged.
pub fn load_or_train_reference(
    problem: &PdeProblem,
    budget: &ReferenceBudget,
    seed: u64,
    dir: &Path,
) -> Result<PdeProblem, PdeError> {
    if problem.has_closed_form() {
        return Ok(problem.clone());
    }
    let path = reference_path(dir, problem, budget, seed);
    let checkpoint = if path.exists() {
        NetCheckpoint::load(&path)?
    } else {
        log::info!("training {} reference (z = {}, seed {seed}); caching at {}", problem.name(), problem.z(), path.display());
        let trained = train_reference(problem, budget, seed)?;
        std::fs::create_dir_all(dir).map_err(|source| NnError::Io { path: dir.display().to_string(), source })?;
        trained.checkpoint.save(&path)?;
        trained.checkpoint
    };
    Ok(problem.clone().with_reference(checkpoint))
}
