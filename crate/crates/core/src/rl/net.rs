use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::autodiff::batch::{self, Channels, Trace};
use crate::nn::{init_params_with, Activation, AdamConfig, AdamState, MlpSpec, NnError};

/// A small MLP with its own optimizer. Inputs and outputs are columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Net {
    pub spec: MlpSpec,
    pub params: Vec<f64>,
    pub adam: AdamState,
}

impl Net {
    pub fn new<R: Rng>(
        input: usize,
        hidden: &[usize],
        output: usize,
        output_act: Activation,
        final_bound: Option<f64>,
        lr: f64,
        rng: &mut R,
    ) -> Self {
        let spec = MlpSpec::dense(input, hidden, output, Activation::Tanh, output_act);
        let params = init_params_with(&spec, rng, final_bound);
        let adam = AdamState::new(params.len(), AdamConfig::with_lr(lr));
        Self { spec, params, adam }
    }

    pub fn eval(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        batch::values(&self.spec, &self.params, x)
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Trace {
        batch::forward(&self.spec, &self.params, x, &Channels::values())
    }

    /// Input gradient and parameter gradient for the output cotangent
    /// `upstream`.
    pub fn backward(&self, trace: &Trace, upstream: Array2<f64>) -> (Array2<f64>, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let input = batch::backward(&self.spec, &self.params, trace, upstream, &mut grad);
        (input, grad)
    }

    pub fn apply(&mut self, grad: &[f64]) -> Result<(), NnError> {
        self.adam.step(&mut self.params, grad)
    }

    /// Polyak averaging `θ ← τ θ_src + (1 − τ) θ`.
    pub fn soft_update(&mut self, src: &Net, tau: f64) {
        for (t, s) in self.params.iter_mut().zip(&src.params) {
            *t = tau * s + (1.0 - tau) * *t;
        }
    }
}

/// Stacks two column blocks vertically.
pub fn stack(top: ArrayView2<'_, f64>, bottom: ArrayView2<'_, f64>) -> Array2<f64> {
    ndarray::concatenate(ndarray::Axis(0), &[top, bottom]).expect("blocks share the batch size")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyak_with_unit_tau_copies() {
        let mut rng = crate::seed::stream(0, "net", 0);
        let a = Net::new(3, &[8], 2, Activation::Linear, None, 1e-3, &mut rng);
        let mut b = Net::new(3, &[8], 2, Activation::Linear, None, 1e-3, &mut rng);
        assert_ne!(a.params, b.params);
        b.soft_update(&a, 1.0);
        assert_eq!(a.params, b.params);
    }
}
