use ndarray::{s, Array2, ArrayView2};

use super::problem::{channel_comps, component_channel};
use super::{Constraint, PdeError, PdeProblem, Reference};
use crate::autodiff::batch::{self, Channels};
use crate::nn::MlpSpec;
use crate::par::Exec;

/// A boundary or initial collocation point tagged with the index of the
/// condition (into [`PdeProblem::conditions`]) it enforces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub point: [f64; 2],
    pub condition: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CollocationSet {
    pub interior: Vec<[f64; 2]>,
    pub boundary: Vec<BoundaryPoint>,
}

impl CollocationSet {
    /// Checks interior points are strictly inside and boundary points lie on
    /// their condition's edge.
    pub fn validate(&self, problem: &PdeProblem) -> Result<(), PdeError> {
        if let Some(p) = self.interior.iter().find(|p| !problem.domain.contains_strictly(**p)) {
            return Err(PdeError::OutOfDomain { point: *p });
        }
        for b in &self.boundary {
            let ok = problem.conditions.get(b.condition).is_some_and(|c| problem.on_edge(*c, b.point));
            if !ok {
                return Err(PdeError::OutOfDomain { point: b.point });
            }
        }
        Ok(())
    }
}

/// Points as a `2 × n` column matrix.
pub fn points_matrix(points: &[[f64; 2]]) -> Array2<f64> {
    let mut m = Array2::zeros((2, points.len()));
    for (j, p) in points.iter().enumerate() {
        m[[0, j]] = p[0];
        m[[1, j]] = p[1];
    }
    m
}

/// Anything that can report channel jets of a scalar field at a batch of
/// points (1 × channels·n).
pub trait SolutionModel {
    fn jets(&self, xs: ArrayView2<'_, f64>, ch: &Channels) -> Array2<f64>;
}

pub struct MlpModel<'a> {
    pub spec: &'a MlpSpec,
    pub params: &'a [f64],
}

impl SolutionModel for MlpModel<'_> {
    fn jets(&self, xs: ArrayView2<'_, f64>, ch: &Channels) -> Array2<f64> {
        batch::forward(self.spec, self.params, xs, ch).output().to_owned()
    }
}

/// The closed-form solution viewed as a model.
pub struct ExactModel<'a>(pub &'a PdeProblem);

impl SolutionModel for ExactModel<'_> {
    fn jets(&self, xs: ArrayView2<'_, f64>, ch: &Channels) -> Array2<f64> {
        let n = xs.ncols();
        let mut out = Array2::zeros((1, ch.count() * n));
        for j in 0..n {
            let jet = self.0.exact_jet([xs[[0, j]], xs[[1, j]]]).expect("problem has a closed form");
            let comps = [jet.u, jet.u_x(), jet.u_t(), jet.u_xx(), jet.u_tt()];
            for (k, v) in comps.iter().enumerate() {
                if let Some(c) = component_channel(ch, k) {
                    out[[0, c * n + j]] = *v;
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PinnLoss {
    /// `interior + w · boundary`.
    pub total: f64,
    /// `Σ f(x)²` over interior points.
    pub interior: f64,
    /// `Σ B(x)²` over boundary points (unweighted).
    pub boundary: f64,
    /// Gradient of `total` with respect to the parameters, when requested.
    pub grad: Option<Vec<f64>>,
}

fn boundary_channels(problem: &PdeProblem) -> Channels {
    if problem.conditions.iter().any(|c| c.constraint == Constraint::Velocity) {
        Channels::new(&[1], &[])
    } else {
        Channels::values()
    }
}

/// Interior residual sum and its upstream gradient on the channel jets.
fn interior_terms(problem: &PdeProblem, xs: ArrayView2<'_, f64>, jets: ArrayView2<'_, f64>, ch: &Channels) -> (f64, Array2<f64>) {
    let n = xs.ncols();
    let mut up = Array2::zeros(jets.raw_dim());
    let mut sum = 0.0;
    for j in 0..n {
        let (f, d) = problem.residual_terms([xs[[0, j]], xs[[1, j]]], channel_comps(ch, jets, n, j));
        sum += f * f;
        for (k, dk) in d.iter().enumerate() {
            if *dk != 0.0 {
                let c = component_channel(ch, k).expect("residual reads a channel that was not propagated");
                up[[0, c * n + j]] += 2.0 * f * dk;
            }
        }
    }
    (sum, up)
}

fn boundary_terms(problem: &PdeProblem, pts: &[BoundaryPoint], jets: ArrayView2<'_, f64>, ch: &Channels) -> (f64, Array2<f64>) {
    let n = pts.len();
    let mut up = Array2::zeros(jets.raw_dim());
    let mut sum = 0.0;
    for (j, b) in pts.iter().enumerate() {
        let cond = problem.conditions[b.condition];
        let (c, r) = match cond.constraint {
            Constraint::Value => (0, jets[[0, j]] - problem.condition_target(cond, b.point[0])),
            Constraint::Velocity => {
                let c = ch.first_index(1).expect("velocity condition needs the t channel");
                (c, jets[[0, c * n + j]])
            }
        };
        sum += r * r;
        up[[0, c * n + j]] = 2.0 * r;
    }
    (sum, up)
}

/// PINN objective `Σ_{X_f} f² + w Σ_{X_b} B²` and its parameter gradient.
pub fn pinn_loss(
    problem: &PdeProblem,
    spec: &MlpSpec,
    params: &[f64],
    colloc: &CollocationSet,
) -> Result<PinnLoss, PdeError> {
    if colloc.interior.is_empty() {
        return Err(PdeError::EmptyCollocation);
    }
    let w = problem.boundary_weight;
    let mut grad = vec![0.0; spec.n_params()];

    let ch = problem.interior_channels();
    let xs = points_matrix(&colloc.interior);
    let trace = batch::forward(spec, params, xs.view(), &ch);
    let (interior, up) = interior_terms(problem, xs.view(), trace.output(), &ch);
    batch::backward(spec, params, &trace, up, &mut grad);

    let mut boundary = 0.0;
    if !colloc.boundary.is_empty() {
        let bch = boundary_channels(problem);
        let pts: Vec<[f64; 2]> = colloc.boundary.iter().map(|b| b.point).collect();
        let bx = points_matrix(&pts);
        let btrace = batch::forward(spec, params, bx.view(), &bch);
        let (sum, mut bup) = boundary_terms(problem, &colloc.boundary, btrace.output(), &bch);
        boundary = sum;
        if w != 0.0 {
            bup *= w;
            batch::backward(spec, params, &btrace, bup, &mut grad);
        }
    }
    Ok(PinnLoss { total: interior + w * boundary, interior, boundary, grad: Some(grad) })
}

/// Loss value for any [`SolutionModel`], without gradients.
pub fn pinn_loss_value<M: SolutionModel>(
    problem: &PdeProblem,
    model: &M,
    colloc: &CollocationSet,
) -> Result<PinnLoss, PdeError> {
    if colloc.interior.is_empty() {
        return Err(PdeError::EmptyCollocation);
    }
    let ch = problem.interior_channels();
    let xs = points_matrix(&colloc.interior);
    let (interior, _) = interior_terms(problem, xs.view(), model.jets(xs.view(), &ch).view(), &ch);
    let mut boundary = 0.0;
    if !colloc.boundary.is_empty() {
        let bch = boundary_channels(problem);
        let pts: Vec<[f64; 2]> = colloc.boundary.iter().map(|b| b.point).collect();
        let bx = points_matrix(&pts);
        boundary = boundary_terms(problem, &colloc.boundary, model.jets(bx.view(), &bch).view(), &bch).0;
    }
    Ok(PinnLoss { total: interior + problem.boundary_weight * boundary, interior, boundary, grad: None })
}

const CHUNK: usize = 1024;

/// Interior residuals `f(x; u_θ)` at `points`, evaluated in fixed chunks.
pub fn residuals(problem: &PdeProblem, spec: &MlpSpec, params: &[f64], points: &[[f64; 2]], exec: Exec) -> Vec<f64> {
    let ch = problem.interior_channels();
    exec.map_chunks(points.len(), CHUNK, |r| {
        let xs = points_matrix(&points[r]);
        let tr = batch::forward(spec, params, xs.view(), &ch);
        problem.residuals(xs.view(), tr.output())
    })
    .concat()
}

/// Network values at `points`, evaluated in fixed chunks.
pub fn predict(spec: &MlpSpec, params: &[f64], points: &[[f64; 2]], exec: Exec) -> Vec<f64> {
    exec.map_chunks(points.len(), CHUNK, |r| {
        let xs = points_matrix(&points[r]);
        batch::values(spec, params, xs.view()).slice(s![0, ..]).to_vec()
    })
    .concat()
}

/// Reference solution at `points`: closed form or the attached network.
pub fn reference_values(problem: &PdeProblem, points: &[[f64; 2]], exec: Exec) -> Result<Vec<f64>, PdeError> {
    match &problem.reference {
        Reference::Exact => Ok(points.iter().map(|p| problem.exact(p[0], p[1]).unwrap()).collect()),
        Reference::Network(net) => Ok(predict(&net.spec, &net.params, points, exec)),
        Reference::Missing => Err(PdeError::NoReference { pde: problem.name() }),
    }
}

/// Relative L2 error `‖u − u_ref‖ / ‖u_ref‖`, falling back to the RMSE when
/// the reference is (numerically) zero on the evaluation set.
pub fn relative_l2(candidate: &[f64], reference: &[f64]) -> f64 {
    let diff: f64 = candidate.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum();
    let norm: f64 = reference.iter().map(|b| b * b).sum();
    if norm < 1e-12 {
        (diff / reference.len().max(1) as f64).sqrt()
    } else {
        (diff / norm).sqrt()
    }
}

/// Relative L2 error of the network against the problem's reference.
pub fn solution_error(
    problem: &PdeProblem,
    spec: &MlpSpec,
    params: &[f64],
    points: &[[f64; 2]],
) -> Result<f64, PdeError> {
    if points.is_empty() {
        return Err(PdeError::EmptyCollocation);
    }
    let exec = Exec::default();
    let reference = reference_values(problem, points, exec)?;
    Ok(relative_l2(&predict(spec, params, points, exec), &reference))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_params_of_residual;
    use crate::nn::{init_params, Activation};
    use crate::pde::{make_burgers, make_diffusion, make_wave};
    use rand::{Rng, SeedableRng};

    fn random_set(problem: &PdeProblem, n: usize, seed: u64) -> CollocationSet {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let interior = (0..n).map(|_| problem.domain.from_unit([rng.random(), rng.random()])).collect();
        let d = problem.domain;
        let boundary = (0..n)
            .map(|i| {
                let c = i % problem.conditions.len();
                let point = match problem.conditions[c].edge {
                    crate::pde::Edge::Initial => [d.x.0 + rng.random::<f64>() * (d.x.1 - d.x.0), d.t.0],
                    crate::pde::Edge::Left => [d.x.0, rng.random()],
                    crate::pde::Edge::Right => [d.x.1, rng.random()],
                };
                BoundaryPoint { point, condition: c }
            })
            .collect();
        CollocationSet { interior, boundary }
    }

    #[test]
    fn exact_solution_has_vanishing_loss() {
        for p in [make_diffusion(1.0).unwrap(), make_diffusion(2.2).unwrap(), make_wave(2).unwrap()] {
            for seed in 0..3 {
                let set = random_set(&p, 40, seed);
                set.validate(&p).unwrap();
                let loss = pinn_loss_value(&p, &ExactModel(&p), &set).unwrap();
                assert!(loss.total < 1e-10, "{:?}: {}", p.kind, loss.total);
            }
        }
    }

    #[test]
    fn empty_interior_is_rejected() {
        let p = make_diffusion(1.0).unwrap();
        let spec = MlpSpec::pinn();
        let params = init_params(&spec, 0);
        assert!(matches!(pinn_loss(&p, &spec, &params, &CollocationSet::default()), Err(PdeError::EmptyCollocation)));
    }

    #[test]
    fn zero_boundary_weight_keeps_interior_only() {
        let p = make_wave(1).unwrap().with_boundary_weight(0.0);
        let spec = MlpSpec::dense(2, &[6, 6], 1, Activation::Tanh, Activation::Linear);
        let params = init_params(&spec, 4);
        let set = random_set(&p, 10, 1);
        let loss = pinn_loss(&p, &spec, &params, &set).unwrap();
        assert_eq!(loss.total, loss.interior);
        assert!(loss.boundary > 0.0);
        let interior_only = CollocationSet { interior: set.interior.clone(), boundary: vec![] };
        let l2 = pinn_loss(&p, &spec, &params, &interior_only).unwrap();
        assert_eq!(l2.grad, loss.grad);
    }

    #[test]
    fn interior_gradient_matches_residual_tape() {
        for p in [make_diffusion(1.5).unwrap(), make_wave(2).unwrap(), make_burgers(0.05).unwrap()] {
            let spec = MlpSpec::dense(2, &[5, 4], 1, Activation::Tanh, Activation::Linear);
            let params = init_params(&spec, 17);
            let set = CollocationSet { interior: random_set(&p, 3, 2).interior, boundary: vec![] };
            let fast = pinn_loss(&p, &spec, &params, &set).unwrap().grad.unwrap();
            let mut slow = vec![0.0; spec.n_params()];
            for &pt in &set.interior {
                let g = grad_params_of_residual(&spec, &params, pt, &p).unwrap();
                slow.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{:?}: {a} vs {b}", p.kind);
            }
        }
    }

    #[test]
    fn full_loss_gradient_matches_finite_differences() {
        let p = make_wave(1).unwrap();
        let spec = MlpSpec::dense(2, &[6], 1, Activation::Tanh, Activation::Linear);
        let params = init_params(&spec, 3);
        let set = random_set(&p, 4, 7);
        let g = pinn_loss(&p, &spec, &params, &set).unwrap().grad.unwrap();
        for k in 0..spec.n_params() {
            let h = 1e-6;
            let mut pp = params.clone();
            let mut pm = params.clone();
            pp[k] += h;
            pm[k] -= h;
            let fd = (pinn_loss(&p, &spec, &pp, &set).unwrap().total - pinn_loss(&p, &spec, &pm, &set).unwrap().total)
                / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * fd.abs().max(1e-3), "k={k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn relative_error_edge_cases() {
        let p = make_diffusion(1.0).unwrap();
        let pts: Vec<[f64; 2]> = random_set(&p, 50, 3).interior;
        let reference = reference_values(&p, &pts, Exec::Sequential).unwrap();
        assert_eq!(relative_l2(&reference, &reference), 0.0);
        assert!((relative_l2(&vec![0.0; 50], &reference) - 1.0).abs() < 1e-15);
        let doubled: Vec<f64> = reference.iter().map(|r| 2.0 * r).collect();
        let cand: Vec<f64> = reference.iter().map(|r| r + 0.1).collect();
        let cand2: Vec<f64> = cand.iter().map(|c| 2.0 * c).collect();
        assert!((relative_l2(&cand, &reference) - relative_l2(&cand2, &doubled)).abs() < 1e-14);
        assert!((relative_l2(&[0.1, -0.1], &[0.0, 0.0]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn burgers_without_reference_errors() {
        let p = make_burgers(0.01).unwrap();
        let spec = MlpSpec::pinn();
        let params = init_params(&spec, 0);
        assert!(matches!(solution_error(&p, &spec, &params, &[[0.0, 0.5]]), Err(PdeError::NoReference { .. })));
    }
}
