use ndarray::{s, Array2, ArrayView2};

use super::{init_params, MlpSpec, NnError};
use crate::autodiff::batch::{self, Channels};
use crate::par::Exec;

/// Candidate Lyapunov function `v(x) = ‖g(x) − g(0)‖² + ε‖x‖²`.
///
/// Subtracting `g(0)` pins `v(0) = 0` exactly and the `ε‖x‖²` term makes
/// `v` positive away from the origin for every parameter setting.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovNet {
    pub spec: MlpSpec,
    pub params: Vec<f64>,
    pub eps: f64,
}

pub const DEFAULT_EPS: f64 = 1e-3;

const CHUNK: usize = 1024;

impl LyapunovNet {
    pub fn new(spec: MlpSpec, params: Vec<f64>, eps: f64) -> Result<Self, NnError> {
        if spec.input_dim() != 2 {
            return Err(NnError::InvalidSpec(format!("state dimension must be 2, got {}", spec.input_dim())));
        }
        if params.len() != spec.n_params() {
            return Err(NnError::LengthMismatch { params: params.len(), grads: params.len(), state: spec.n_params() });
        }
        if !(eps > 0.0) {
            return Err(NnError::InvalidSpec(format!("regularizer must be positive, got {eps}")));
        }
        Ok(LyapunovNet { spec, params, eps })
    }

    /// Default feature network with Glorot initialisation.
    pub fn init(seed: u64) -> Self {
        let spec = MlpSpec::lyapunov_features();
        let params = init_params(&spec, seed);
        LyapunovNet { spec, params, eps: DEFAULT_EPS }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        let g = self.spec.forward(&self.params, &x);
        let g0 = self.spec.forward(&self.params, &[0.0, 0.0]);
        let feat: f64 = g.iter().zip(&g0).map(|(a, b)| (a - b) * (a - b)).sum();
        feat + self.eps * (x[0] * x[0] + x[1] * x[1])
    }

    pub fn sublevel(&self, x: [f64; 2], c: f64) -> bool {
        self.value(x) <= c
    }

    fn origin_features(&self) -> Vec<f64> {
        self.spec.forward(&self.params, &[0.0, 0.0])
    }

    fn finish(&self, g: &Array2<f64>, g0: &[f64], xs: ArrayView2<'_, f64>) -> Vec<f64> {
        (0..xs.ncols())
            .map(|j| {
                let feat: f64 = g.column(j).iter().zip(g0).map(|(a, b)| (a - b) * (a - b)).sum();
                let (x0, x1) = (xs[[0, j]], xs[[1, j]]);
                feat + self.eps * (x0 * x0 + x1 * x1)
            })
            .collect()
    }

    /// Values at the columns of `xs` (2 × n), evaluated in fixed-size chunks.
    pub fn values(&self, xs: ArrayView2<'_, f64>, exec: Exec) -> Vec<f64> {
        let g0 = self.origin_features();
        exec.map_chunks(xs.ncols(), CHUNK, |r| {
            let sub = xs.slice(s![.., r]);
            let g = batch::values(&self.spec, &self.params, sub);
            self.finish(&g, &g0, sub)
        })
        .concat()
    }

    /// Values at `xs` plus the parameter gradient of `Σᵢ wᵢ v(xᵢ)`, where
    /// the weights `wᵢ = dL/dvᵢ` are computed from the values by `dloss`.
    pub fn value_and_grad<F>(&self, xs: ArrayView2<'_, f64>, dloss: F) -> (Vec<f64>, Vec<f64>)
    where
        F: FnOnce(&[f64]) -> Vec<f64>,
    {
        let n = xs.ncols();
        let mut with_origin = Array2::zeros((2, n + 1));
        with_origin.slice_mut(s![.., 0..n]).assign(&xs);
        let trace = batch::forward(&self.spec, &self.params, with_origin.view(), &Channels::values());
        let out = trace.values();
        let g0: Vec<f64> = out.column(n).to_vec();
        let values = self.finish(&out.slice(s![.., 0..n]).to_owned(), &g0, xs);
        let weights = dloss(&values);
        assert_eq!(weights.len(), n, "one loss weight per point");
        let mut upstream = trace.zero_grad();
        for (j, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for k in 0..g0.len() {
                let d = 2.0 * w * (out[[k, j]] - g0[k]);
                upstream[[k, j]] = d;
                upstream[[k, n]] -= d;
            }
        }
        let mut grad = vec![0.0; self.spec.n_params()];
        batch::backward(&self.spec, &self.params, &trace, upstream, &mut grad);
        (values, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{ParamTape, Real, Var};
    use ndarray::array;
    use proptest::prelude::*;

    fn small() -> LyapunovNet {
        let spec = MlpSpec::dense(2, &[5], 3, crate::nn::Activation::Tanh, crate::nn::Activation::Linear);
        let params = init_params(&spec, 9);
        LyapunovNet::new(spec, params, 1e-3).unwrap()
    }

    #[test]
    fn origin_is_zero_and_eps_term_alone() {
        let net = LyapunovNet::init(1);
        assert_eq!(net.value([0.0, 0.0]), 0.0);
        let spec = MlpSpec::lyapunov_features();
        let zero = LyapunovNet::new(spec.clone(), vec![0.0; spec.n_params()], 1.0).unwrap();
        assert!((zero.value([0.3, 0.4]) - 0.25).abs() < 1e-15);
        assert!(zero.sublevel([0.3, 0.4], 0.25));
        assert!(!zero.sublevel([0.3, 0.4], 0.2499));
    }

    #[test]
    fn batched_values_match_scalar() {
        let net = LyapunovNet::init(3);
        let xs = array![[0.1, -1.0, 2.0, 0.0], [0.5, 3.0, -0.2, 0.0]];
        let v = net.values(xs.view(), Exec::Sequential);
        for j in 0..4 {
            assert!((v[j] - net.value([xs[[0, j]], xs[[1, j]]])).abs() < 1e-12);
        }
        assert_eq!(v[3], 0.0);
        assert_eq!(v, net.values(xs.view(), Exec::Parallel));
    }

    #[test]
    fn weighted_gradient_matches_tape() {
        let net = small();
        let xs = array![[0.4, -0.7, 1.1], [0.2, 0.9, -1.5]];
        let w = vec![0.5, -1.2, 2.0];
        let (_, grad) = net.value_and_grad(xs.view(), |_| w.clone());
        let tape = ParamTape::new(&net.params);
        let p = tape.params();
        let origin = net.spec.forward(&p, &[Var::constant(0.0), Var::constant(0.0)]);
        let mut loss = Var::constant(0.0);
        for j in 0..3 {
            let g = net.spec.forward(&p, &[Var::constant(xs[[0, j]]), Var::constant(xs[[1, j]])]);
            let mut v = Var::constant(0.0);
            for (a, b) in g.iter().zip(&origin) {
                v = v + (*a - *b) * (*a - *b);
            }
            loss = loss + v * w[j];
        }
        assert!(loss.value().is_finite());
        let reference = tape.gradient(loss);
        for (a, b) in grad.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn positive_definite_for_any_params(seed in 0u64..1000, scale in 0.1f64..5.0,
                                           x in -4.0f64..4.0, y in -4.0f64..4.0) {
            let spec = MlpSpec::dense(2, &[8, 8], 4, crate::nn::Activation::Tanh, crate::nn::Activation::Linear);
            let params: Vec<f64> = init_params(&spec, seed).iter().map(|p| p * scale).collect();
            let net = LyapunovNet::new(spec, params, 1e-3).unwrap();
            prop_assert_eq!(net.value([0.0, 0.0]), 0.0);
            if x != 0.0 || y != 0.0 {
                prop_assert!(net.value([x, y]) > 0.0);
            }
        }
    }
}
