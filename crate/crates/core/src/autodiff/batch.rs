//! Layer-wise jet propagation and its reverse pass for whole batches.
//!
//! Columns are samples. Alongside the values, each layer carries a block of
//! first-order derivative channels `∂/∂xₐ` and diagonal second-order
//! channels `∂²/∂xₐ²` for a chosen set of input axes, stacked side by side
//! so every affine map is a single matrix product:
//!
//! ```text
//! H = [ values | ∂ₐ ... | ∂ₐₐ ... ]      (width × channels·batch)
//! ```
//!
//! Through an activation `f` the channels transform as
//! `h = f(z)`, `hₐ = f'(z) zₐ`, `hₐₐ = f'(z) zₐₐ + f''(z) zₐ²`, and the
//! reverse pass differentiates exactly those expressions, so parameter
//! gradients of losses over `u`, `u_x`, `u_xx`, ... are exact.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, Zip};

use crate::nn::{Activation, MlpSpec};

/// Which derivative channels accompany the values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Channels {
    first: Vec<usize>,
    second: Vec<usize>,
}

impl Channels {
    pub fn values() -> Self {
        Channels { first: Vec::new(), second: Vec::new() }
    }

    /// First-order channels for `first`, diagonal second-order channels for
    /// `second`. Every axis in `second` must also be in `first`.
    pub fn new(first: &[usize], second: &[usize]) -> Self {
        assert!(second.iter().all(|a| first.contains(a)), "second-order axis without first-order channel");
        Channels { first: first.to_vec(), second: second.to_vec() }
    }

    pub fn count(&self) -> usize {
        1 + self.first.len() + self.second.len()
    }

    /// Channel index of `∂/∂x_axis`.
    pub fn first_index(&self, axis: usize) -> Option<usize> {
        self.first.iter().position(|&a| a == axis).map(|i| 1 + i)
    }

    /// Channel index of `∂²/∂x_axis²`.
    pub fn second_index(&self, axis: usize) -> Option<usize> {
        self.second.iter().position(|&a| a == axis).map(|i| 1 + self.first.len() + i)
    }
}

struct LayerCache {
    input: Array2<f64>,
    pre: Array2<f64>,
}

/// Everything the reverse pass needs from a forward sweep.
pub struct Trace {
    channels: Channels,
    batch: usize,
    layers: Vec<LayerCache>,
    output: Array2<f64>,
}

impl Trace {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> &Channels {
        &self.channels
    }

    /// Output channel `c` as an `(outputs × batch)` view.
    pub fn channel(&self, c: usize) -> ArrayView2<'_, f64> {
        self.output.slice(s![.., c * self.batch..(c + 1) * self.batch])
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.channel(0)
    }

    /// All output channels side by side (outputs × channels·batch).
    pub fn output(&self) -> ArrayView2<'_, f64> {
        self.output.view()
    }

    /// A zeroed upstream gradient shaped like the output.
    pub fn zero_grad(&self) -> Array2<f64> {
        Array2::zeros(self.output.raw_dim())
    }
}

fn layer_views<'a>(spec: &MlpSpec, params: &'a [f64], layer: usize) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
    let l = spec.layer(layer);
    let w = ArrayView2::from_shape((l.fan_out, l.fan_in), &params[l.weight_offset..l.bias_offset]).unwrap();
    let b = ArrayView1::from(&params[l.bias_offset..l.bias_offset + l.fan_out]);
    (w, b)
}

fn layer_views_mut<'a>(
    spec: &MlpSpec,
    grad: &'a mut [f64],
    layer: usize,
) -> (ArrayViewMut2<'a, f64>, ArrayViewMut1<'a, f64>) {
    let l = spec.layer(layer);
    let (wg, rest) = grad[l.weight_offset..l.bias_offset + l.fan_out].split_at_mut(l.fan_out * l.fan_in);
    (ArrayViewMut2::from_shape((l.fan_out, l.fan_in), wg).unwrap(), ArrayViewMut1::from(rest))
}

/// Applies the activation to every channel block of `z`.
fn activate(act: Activation, z: &Array2<f64>, ch: &Channels, batch: usize) -> Array2<f64> {
    if act == Activation::Linear {
        return z.clone();
    }
    if ch.count() == 1 {
        return z.mapv(|v| act.eval(v));
    }
    let mut out = Array2::zeros(z.raw_dim());
    let z0 = z.slice(s![.., 0..batch]);
    let mut d1 = Array2::zeros(z0.raw_dim());
    let mut d2 = Array2::zeros(z0.raw_dim());
    {
        let mut o0 = out.slice_mut(s![.., 0..batch]);
        Zip::from(&mut o0).and(&mut d1).and(&mut d2).and(&z0).for_each(|o, f1, f2, &zz| {
            let [f, a, b, _] = act.derivatives(zz);
            *o = f;
            *f1 = a;
            *f2 = b;
        });
    }
    for &axis in &ch.first {
        let c = ch.first_index(axis).unwrap();
        let za = z.slice(s![.., c * batch..(c + 1) * batch]);
        let mut oa = out.slice_mut(s![.., c * batch..(c + 1) * batch]);
        Zip::from(&mut oa).and(&za).and(&d1).for_each(|o, &v, &f1| *o = f1 * v);
        if let Some(cc) = ch.second_index(axis) {
            let zaa = z.slice(s![.., cc * batch..(cc + 1) * batch]);
            let mut oaa = out.slice_mut(s![.., cc * batch..(cc + 1) * batch]);
            Zip::from(&mut oaa)
                .and(&zaa)
                .and(&za)
                .and(&d1)
                .and(&d2)
                .for_each(|o, &vv, &v, &f1, &f2| *o = f1 * vv + f2 * v * v);
        }
    }
    out
}

/// Reverse of [`activate`]: maps `dL/dh` to `dL/dz` in place.
fn activate_backward(act: Activation, z: &Array2<f64>, h: &Array2<f64>, g: &mut Array2<f64>, ch: &Channels, batch: usize) {
    if act == Activation::Linear {
        return;
    }
    if ch.count() == 1 {
        // Values only: f' is all that is needed, and for tanh it follows
        // from the cached output without another transcendental call.
        match act {
            Activation::Tanh => Zip::from(g).and(h).for_each(|v, &a| *v *= 1.0 - a * a),
            _ => Zip::from(g).and(z).for_each(|v, &zz| *v *= act.derivatives(zz)[1]),
        }
        return;
    }
    let z0 = z.slice(s![.., 0..batch]);
    let shape = z0.raw_dim();
    let mut f1 = Array2::zeros(shape.clone());
    let mut f2 = Array2::zeros(shape.clone());
    let mut f3 = Array2::zeros(shape);
    Zip::from(&mut f1).and(&mut f2).and(&mut f3).and(&z0).for_each(|a, b, c, &zz| {
        let [_, d1, d2, d3] = act.derivatives(zz);
        *a = d1;
        *b = d2;
        *c = d3;
    });
    // Value-channel gradient collects contributions from every derivative
    // channel, so compute it before the others are overwritten.
    let mut g0 = g.slice(s![.., 0..batch]).to_owned();
    Zip::from(&mut g0).and(&f1).for_each(|v, &a| *v *= a);
    for &axis in &ch.first {
        let c = ch.first_index(axis).unwrap();
        let za = z.slice(s![.., c * batch..(c + 1) * batch]);
        let ga = g.slice(s![.., c * batch..(c + 1) * batch]);
        Zip::from(&mut g0).and(&ga).and(&za).and(&f2).for_each(|v, &gg, &zz, &b| *v += gg * b * zz);
        if let Some(cc) = ch.second_index(axis) {
            let zaa = z.slice(s![.., cc * batch..(cc + 1) * batch]);
            let gaa = g.slice(s![.., cc * batch..(cc + 1) * batch]);
            Zip::from(&mut g0)
                .and(&gaa)
                .and(&zaa)
                .and(&za)
                .and(&f2)
                .and(&f3)
                .for_each(|v, &gg, &zz2, &zz, &b, &c3| *v += gg * (b * zz2 + c3 * zz * zz));
        }
    }
    for &axis in &ch.first {
        let c = ch.first_index(axis).unwrap();
        let za = z.slice(s![.., c * batch..(c + 1) * batch]).to_owned();
        if let Some(cc) = ch.second_index(axis) {
            let gaa = g.slice(s![.., cc * batch..(cc + 1) * batch]).to_owned();
            let mut ga = g.slice_mut(s![.., c * batch..(c + 1) * batch]);
            Zip::from(&mut ga)
                .and(&gaa)
                .and(&za)
                .and(&f1)
                .and(&f2)
                .for_each(|v, &gg, &zz, &a, &b| *v = *v * a + 2.0 * gg * b * zz);
            let mut gaa_mut = g.slice_mut(s![.., cc * batch..(cc + 1) * batch]);
            Zip::from(&mut gaa_mut).and(&f1).for_each(|v, &a| *v *= a);
        } else {
            let mut ga = g.slice_mut(s![.., c * batch..(c + 1) * batch]);
            Zip::from(&mut ga).and(&f1).for_each(|v, &a| *v *= a);
        }
    }
    g.slice_mut(s![.., 0..batch]).assign(&g0);
}

/// Input block: values, unit seeds on the first-order channels, zero
/// second-order channels.
fn seed_inputs(x: ArrayView2<'_, f64>, ch: &Channels) -> Array2<f64> {
    let batch = x.ncols();
    let mut h = Array2::zeros((x.nrows(), ch.count() * batch));
    h.slice_mut(s![.., 0..batch]).assign(&x);
    for &axis in &ch.first {
        let c = ch.first_index(axis).unwrap();
        h.slice_mut(s![axis, c * batch..(c + 1) * batch]).fill(1.0);
    }
    h
}

/// Forward sweep over a batch of inputs `x` (input_dim × batch).
pub fn forward(spec: &MlpSpec, params: &[f64], x: ArrayView2<'_, f64>, channels: &Channels) -> Trace {
    assert_eq!(x.nrows(), spec.input_dim(), "input rows must equal the input dimension");
    assert_eq!(params.len(), spec.n_params(), "parameter count mismatch");
    let batch = x.ncols();
    let mut h = seed_inputs(x, channels);
    let mut layers = Vec::with_capacity(spec.n_layers());
    for l in 0..spec.n_layers() {
        let (w, b) = layer_views(spec, params, l);
        let mut z = Array2::zeros((w.nrows(), h.ncols()));
        general_mat_mul(1.0, &w, &h, 0.0, &mut z);
        z.slice_mut(s![.., 0..batch]).axis_iter_mut(Axis(1)).for_each(|mut col| col += &b);
        let next = activate(spec.layer(l).activation, &z, channels, batch);
        layers.push(LayerCache { input: h, pre: z });
        h = next;
    }
    Trace { channels: channels.clone(), batch, layers, output: h }
}

/// Reverse sweep. `grad_out` is `dL/d(output channels)` with the shape of
/// the output; parameter gradients are accumulated into `param_grad`.
/// Returns `dL/d(input channels)` (input_dim × channels·batch).
pub fn backward(spec: &MlpSpec, params: &[f64], trace: &Trace, grad_out: Array2<f64>, param_grad: &mut [f64]) -> Array2<f64> {
    assert_eq!(grad_out.raw_dim(), trace.output.raw_dim(), "upstream gradient shape mismatch");
    assert_eq!(param_grad.len(), spec.n_params(), "gradient buffer length mismatch");
    let batch = trace.batch;
    let mut g = grad_out;
    for l in (0..spec.n_layers()).rev() {
        let cache = &trace.layers[l];
        let post = trace.layers.get(l + 1).map_or(&trace.output, |next| &next.input);
        activate_backward(spec.layer(l).activation, &cache.pre, post, &mut g, &trace.channels, batch);
        let (w, _) = layer_views(spec, params, l);
        {
            let (mut wg, mut bg) = layer_views_mut(spec, param_grad, l);
            general_mat_mul(1.0, &g, &cache.input.t(), 1.0, &mut wg);
            bg += &g.slice(s![.., 0..batch]).sum_axis(Axis(1));
        }
        let mut prev = Array2::zeros(cache.input.raw_dim());
        general_mat_mul(1.0, &w.t(), &g, 0.0, &mut prev);
        g = prev;
    }
    g
}

/// Plain forward values without keeping a trace.
pub fn values(spec: &MlpSpec, params: &[f64], x: ArrayView2<'_, f64>) -> Array2<f64> {
    assert_eq!(x.nrows(), spec.input_dim(), "input rows must equal the input dimension");
    let mut h = x.to_owned();
    for l in 0..spec.n_layers() {
        let (w, b) = layer_views(spec, params, l);
        let mut z = Array2::zeros((w.nrows(), h.ncols()));
        general_mat_mul(1.0, &w, &h, 0.0, &mut z);
        let act = spec.layer(l).activation;
        Zip::from(z.rows_mut()).and(&b).for_each(|mut row, &bb| {
            row.mapv_inplace(|v| act.eval(v + bb));
        });
        h = z;
    }
    h
}
