//! The three PDE environments (diffusion, wave, Burgers), collocation sets
//! and the PINN objective `Σ f² + w Σ B²`.

mod loss;
mod problem;
mod reference;

pub use loss::{
    pinn_loss, pinn_loss_value, points_matrix, predict, reference_values, relative_l2, residuals, solution_error,
    BoundaryPoint, CollocationSet, ExactModel, MlpModel, PinnLoss, SolutionModel,
};
pub use problem::{
    make_burgers, make_diffusion, make_problem, make_wave, Condition, Constraint, Domain, Edge, PdeEnv, PdeKind,
    PdeProblem, Reference,
};
pub use reference::{
    load_or_train_reference, reference_path, residual_rms, train_reference, ReferenceBudget, TrainedReference,
};

use rand::Rng;

use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum PdeError {
    #[error("invalid parameter for {pde}: {value}")]
    InvalidParameter { pde: &'static str, value: f64 },
    #[error("collocation set has no interior points")]
    EmptyCollocation,
    #[error("collocation point ({}, {}) is not where its tag says", point[0], point[1])]
    OutOfDomain { point: [f64; 2] },
    #[error("{pde} has no closed form and no reference network attached")]
    NoReference { pde: &'static str },
    #[error("{pde} reference training diverged at step {step} (seed {seed}, z {z}): {detail}")]
    Diverged { pde: &'static str, z: f64, seed: u64, step: usize, detail: String },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Uniform draw from the open unit interval.
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// `n` i.i.d. uniform points strictly inside the domain.
pub fn sample_interior<R: Rng + ?Sized>(domain: &Domain, n: usize, rng: &mut R) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| loop {
            let p = domain.from_unit([open_unit(rng), open_unit(rng)]);
            // Rounding can land an extreme draw exactly on the edge.
            if domain.contains_strictly(p) {
                break p;
            }
        })
        .collect()
}

/// `n` boundary points split as evenly as possible across the problem's
/// conditions (earlier conditions take the remainder), uniform along each
/// edge.
pub fn sample_boundary<R: Rng + ?Sized>(problem: &PdeProblem, n: usize, rng: &mut R) -> Vec<BoundaryPoint> {
    let k = problem.conditions.len();
    let d = problem.domain;
    let mut out = Vec::with_capacity(n);
    for (c, cond) in problem.conditions.iter().enumerate() {
        let count = n / k + usize::from(c < n % k);
        for _ in 0..count {
            let u: f64 = rng.random();
            let point = match cond.edge {
                Edge::Initial => [d.x.0 + u * (d.x.1 - d.x.0), d.t.0],
                Edge::Left => [d.x.0, d.t.0 + u * (d.t.1 - d.t.0)],
                Edge::Right => [d.x.1, d.t.0 + u * (d.t.1 - d.t.0)],
            };
            out.push(BoundaryPoint { point, condition: c });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn boundary_split_is_even() {
        let p = make_wave(1).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pts = sample_boundary(&p, 50, &mut rng);
        let counts: Vec<usize> = (0..4).map(|c| pts.iter().filter(|b| b.condition == c).count()).collect();
        assert_eq!(counts, vec![13, 13, 12, 12]);
        let set = CollocationSet { interior: sample_interior(&p.domain, 100, &mut rng), boundary: pts };
        set.validate(&p).unwrap();
    }
}
