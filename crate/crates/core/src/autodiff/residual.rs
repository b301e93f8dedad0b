use super::{check_dim, AutodiffError, HyperDual, ParamTape, Real, Var};
use crate::nn::MlpSpec;

/// A requested partial derivative `∂^(a+b) u / ∂x^a ∂t^b`, stored as
/// per-axis counts over the (x, t) inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Partial(pub [u8; 2]);

impl Partial {
    pub const U: Partial = Partial([0, 0]);
    pub const UX: Partial = Partial([1, 0]);
    pub const UT: Partial = Partial([0, 1]);
    pub const UXX: Partial = Partial([2, 0]);
    pub const UTT: Partial = Partial([0, 2]);
    pub const UXT: Partial = Partial([1, 1]);

    pub fn order(self) -> usize {
        usize::from(self.0[0]) + usize::from(self.0[1])
    }
}

/// Value, gradient and Hessian of a scalar field at one (x, t) point.
/// Entries that were not requested are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T> {
    pub u: T,
    pub grad: [T; 2],
    pub hess: [[T; 2]; 2],
}

impl<T: Real> Jet<T> {
    pub fn zero() -> Self {
        let z = T::cst(0.0);
        Jet { u: z, grad: [z; 2], hess: [[z; 2]; 2] }
    }
    pub fn u_x(&self) -> T {
        self.grad[0]
    }
    pub fn u_t(&self) -> T {
        self.grad[1]
    }
    pub fn u_xx(&self) -> T {
        self.hess[0][0]
    }
    pub fn u_tt(&self) -> T {
        self.hess[1][1]
    }
    pub fn u_xt(&self) -> T {
        self.hess[0][1]
    }
}

/// A scalar PDE residual `f(x, t; u, u_x, ...)`.
pub trait ResidualOperator {
    /// The partial derivatives the residual reads.
    fn partials(&self) -> Vec<Partial>;
    /// Residual at `point = (x, t)` given the jet of `u` there.
    fn residual<T: Real>(&self, point: [f64; 2], jet: &Jet<T>) -> T;
}

/// Seed directions (axis pairs) needed to cover the requested partials.
fn seed_plan(partials: &[Partial]) -> Result<Vec<(Option<usize>, Option<usize>)>, AutodiffError> {
    let mut passes: Vec<(Option<usize>, Option<usize>)> = Vec::new();
    let mut covered = [false; 2];
    for p in partials {
        if p.order() > 2 {
            return Err(AutodiffError::UnsupportedOrder { order: p.order() });
        }
    }
    for p in partials.iter().filter(|p| p.order() == 2) {
        let axes: Vec<usize> = (0..2).flat_map(|a| std::iter::repeat_n(a, usize::from(p.0[a]))).collect();
        let pass = (Some(axes[0]), Some(axes[1]));
        if !passes.contains(&pass) {
            passes.push(pass);
            covered[axes[0]] = true;
            covered[axes[1]] = true;
        }
    }
    for p in partials.iter().filter(|p| p.order() == 1) {
        let a = if p.0[0] == 1 { 0 } else { 1 };
        if !covered[a] {
            passes.push((Some(a), None));
            covered[a] = true;
        }
    }
    if passes.is_empty() {
        passes.push((None, None));
    }
    Ok(passes)
}

fn unit(axis: Option<usize>, k: usize) -> f64 {
    if axis == Some(k) {
        1.0
    } else {
        0.0
    }
}

/// Jet of the network output at `point` with tape-variable components.
fn tape_jet<'t>(
    spec: &MlpSpec,
    params: &[Var<'t>],
    point: [f64; 2],
    passes: &[(Option<usize>, Option<usize>)],
) -> Jet<Var<'t>> {
    let lifted: Vec<HyperDual<Var<'t>>> = params.iter().map(|&p| HyperDual::constant(p)).collect();
    let mut jet = Jet::zero();
    for &(a, b) in passes {
        let x: Vec<HyperDual<Var<'t>>> = (0..2)
            .map(|k| HyperDual::seeded(Var::constant(point[k]), unit(a, k), unit(b, k)))
            .collect();
        let out = spec.forward(&lifted, &x)[0];
        jet.u = out.value;
        if let Some(i) = a {
            jet.grad[i] = out.d1;
        }
        if let Some(j) = b {
            jet.grad[j] = out.d2;
        }
        if let (Some(i), Some(j)) = (a, b) {
            jet.hess[i][j] = out.d12;
            jet.hess[j][i] = out.d12;
        }
    }
    jet
}

/// Gradient with respect to the parameters of the squared residual
/// `f(point; u_θ)²`.
///
/// Input derivatives come from hyper-dual passes whose components are
/// recorded on a fresh parameter tape, so the result is exact.
pub fn grad_params_of_residual<R: ResidualOperator>(
    spec: &MlpSpec,
    params: &[f64],
    point: [f64; 2],
    op: &R,
) -> Result<Vec<f64>, AutodiffError> {
    check_dim("parameters", spec.n_params(), params.len())?;
    check_dim("input", spec.input_dim(), 2)?;
    check_dim("output", 1, spec.output_dim())?;
    let passes = seed_plan(&op.partials())?;
    let tape = ParamTape::new(params);
    let vars = tape.params();
    let jet = tape_jet(spec, &vars, point, &passes);
    let f = op.residual(point, &jet);
    Ok(tape.gradient(f * f))
}
