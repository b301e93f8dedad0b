use rand::Rng;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

use super::NnError;
use crate::autodiff::Real;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Linear,
    Softplus,
}

impl Activation {
    pub fn apply<T: Real>(self, z: T) -> T {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
            Activation::Softplus => z.softplus(),
        }
    }

    pub fn eval(self, z: f64) -> f64 {
        self.apply(z)
    }

    /// `[f, f', f'', f''']` at `z`.
    pub fn derivatives(self, z: f64) -> [f64; 4] {
        match self {
            Activation::Tanh => {
                let a = z.tanh();
                let s = 1.0 - a * a;
                [a, s, -2.0 * a * s, s * (4.0 * a * a - 2.0 * s)]
            }
            Activation::Linear => [z, 1.0, 0.0, 0.0],
            Activation::Softplus => {
                let sg = crate::autodiff::sigmoid_f64(z);
                let d2 = sg * (1.0 - sg);
                [crate::autodiff::softplus_f64(z), sg, d2, d2 * (1.0 - 2.0 * sg)]
            }
        }
    }
}

/// Shape and offsets of one affine layer in the flat parameter vector.
/// Weights are row-major `(fan_out × fan_in)` followed by the bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
    pub activation: Activation,
}

/// Fully connected network description: `widths[0]` is the input dimension
/// and `activations[i]` follows the affine map `widths[i] → widths[i+1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct MlpSpec {
    widths: Vec<usize>,
    activations: Vec<Activation>,
    #[serde(skip)]
    layers: Vec<Layer>,
}

#[derive(Deserialize)]
struct RawSpec {
    widths: Vec<usize>,
    activations: Vec<Activation>,
}

impl TryFrom<RawSpec> for MlpSpec {
    type Error = NnError;
    fn try_from(raw: RawSpec) -> Result<Self, NnError> {
        MlpSpec::new(raw.widths, raw.activations)
    }
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self, NnError> {
        if widths.len() < 2 {
            return Err(NnError::InvalidSpec("at least an input and an output width are required".into()));
        }
        if widths.contains(&0) {
            return Err(NnError::InvalidSpec("layer widths must be positive".into()));
        }
        if activations.len() != widths.len() - 1 {
            return Err(NnError::InvalidSpec(format!(
                "{} layers need {} activations, got {}",
                widths.len() - 1,
                widths.len() - 1,
                activations.len()
            )));
        }
        let mut layers = Vec::with_capacity(activations.len());
        let mut offset = 0;
        for (i, &activation) in activations.iter().enumerate() {
            let (fan_in, fan_out) = (widths[i], widths[i + 1]);
            let bias_offset = offset + fan_in * fan_out;
            layers.push(Layer { fan_in, fan_out, weight_offset: offset, bias_offset, activation });
            offset = bias_offset + fan_out;
        }
        Ok(MlpSpec { widths, activations, layers })
    }

    /// `input → hidden… → output` with one activation for every hidden
    /// layer and another for the output layer.
    pub fn dense(input: usize, hidden: &[usize], output: usize, hidden_act: Activation, output_act: Activation) -> Self {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(output);
        let mut acts = vec![hidden_act; hidden.len()];
        acts.push(output_act);
        MlpSpec::new(widths, acts).expect("dense spec is valid for positive widths")
    }

    /// Solution network `u_θ(x, t)`: three hidden layers of 32 tanh units.
    pub fn pinn() -> Self {
        MlpSpec::dense(2, &[32, 32, 32], 1, Activation::Tanh, Activation::Linear)
    }

    /// Feature network `g_θ` of the Lyapunov candidate: two hidden layers of
    /// 64 tanh units and 64 linear outputs.
    pub fn lyapunov_features() -> Self {
        MlpSpec::dense(2, &[64, 64], 64, Activation::Tanh, Activation::Linear)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, i: usize) -> Layer {
        self.layers[i]
    }

    pub fn n_params(&self) -> usize {
        self.layers.last().map_or(0, |l| l.bias_offset + l.fan_out)
    }

    /// Scalar forward pass over any [`Real`] type.
    pub fn forward<T: Real>(&self, params: &[T], x: &[T]) -> Vec<T> {
        assert_eq!(params.len(), self.n_params(), "parameter count mismatch");
        assert_eq!(x.len(), self.input_dim(), "input dimension mismatch");
        let mut h: Vec<T> = x.to_vec();
        for l in &self.layers {
            h = (0..l.fan_out)
                .map(|o| {
                    let row = &params[l.weight_offset + o * l.fan_in..][..l.fan_in];
                    let mut acc = params[l.bias_offset + o];
                    for (&w, &v) in row.iter().zip(&h) {
                        acc = acc + w * v;
                    }
                    l.activation.apply(acc)
                })
                .collect();
        }
        h
    }
}

/// Glorot-uniform weights and zero biases, deterministic per seed.
pub fn init_params(spec: &MlpSpec, seed: u64) -> Vec<f64> {
    init_params_with(spec, &mut seed::stream(seed, "init", 0), None)
}

/// Like [`init_params`], drawing from `rng`. When `last_bound` is set the
/// output layer uses `U(-last_bound, last_bound)` instead of Glorot.
pub fn init_params_with<R: Rng>(spec: &MlpSpec, rng: &mut R, last_bound: Option<f64>) -> Vec<f64> {
    let mut params = vec![0.0; spec.n_params()];
    let n = spec.n_layers();
    for i in 0..n {
        let l = spec.layer(i);
        let glorot = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
        let bound = if i + 1 == n { last_bound.unwrap_or(glorot) } else { glorot };
        let dist = Uniform::new_inclusive(-bound, bound).unwrap();
        for w in &mut params[l.weight_offset..l.bias_offset] {
            *w = rng.sample(dist);
        }
    }
    params
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_layout() {
        let spec = MlpSpec::new(vec![2, 3, 1], vec![Activation::Tanh, Activation::Linear]).unwrap();
        assert_eq!(spec.n_params(), 2 * 3 + 3 + 3 + 1);
        assert_eq!(spec.layer(1).weight_offset, 9);
        assert_eq!(spec.layer(1).bias_offset, 12);
        assert_eq!(MlpSpec::pinn().n_params(), 2 * 32 + 32 + 2 * (32 * 32 + 32) + 33);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(MlpSpec::new(vec![2], vec![]).is_err());
        assert!(MlpSpec::new(vec![2, 0, 1], vec![Activation::Tanh, Activation::Linear]).is_err());
        assert!(MlpSpec::new(vec![2, 3, 1], vec![Activation::Tanh]).is_err());
    }

    #[test]
    fn init_is_deterministic_with_zero_biases_and_glorot_bound() {
        let spec = MlpSpec::new(vec![2, 3, 1], vec![Activation::Tanh, Activation::Linear]).unwrap();
        let a = init_params(&spec, 42);
        assert_eq!(a, init_params(&spec, 42));
        assert_ne!(a, init_params(&spec, 43));
        let l0 = spec.layer(0);
        let bound = (6.0f64 / 5.0).sqrt();
        assert!(a[l0.weight_offset..l0.bias_offset].iter().all(|w| w.abs() <= bound));
        assert!(a[l0.bias_offset..l0.bias_offset + 3].iter().all(|&b| b == 0.0));
        assert_eq!(a[spec.n_params() - 1], 0.0);
    }

    #[test]
    fn spec_serde_revalidates() {
        let spec = MlpSpec::pinn();
        let json = serde_json::to_string(&spec).unwrap();
        let back: MlpSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.n_params(), spec.n_params());
        let bad = r#"{"widths":[2,1],"activations":[]}"#;
        assert!(serde_json::from_str::<MlpSpec>(bad).is_err());
    }

    #[test]
    fn activation_derivatives_match_finite_differences() {
        for act in [Activation::Tanh, Activation::Softplus, Activation::Linear] {
            for z in [-2.1, -0.3, 0.0, 0.8, 3.0] {
                let d = act.derivatives(z);
                let h = 1e-5;
                let dp = act.derivatives(z + h);
                let dm = act.derivatives(z - h);
                for k in 0..3 {
                    let fd = (dp[k] - dm[k]) / (2.0 * h);
                    assert!((fd - d[k + 1]).abs() < 1e-8, "{act:?} z={z} k={k}");
                }
            }
        }
    }
}
