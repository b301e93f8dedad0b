//! Exact input derivatives and parameter gradients for small MLPs.
//!
//! Three layers work together:
//!
//! - [`HyperDual`] carries a value with two directional first derivatives
//!   and their mixed second derivative (forward mode);
//! - [`ParamTape`] records scalar operations over a flat parameter vector
//!   and replays them backwards (reverse mode);
//! - [`grad_params_of_residual`] composes the two: hyper-dual components are
//!   tape variables, so the parameter gradient of a PDE residual that uses
//!   `u_x`, `u_xx`, ... is exact.
//!
//! The scalar routes above are reference implementations. Training uses the
//! layer-wise batched kernel in [`batch`], which propagates the same jets
//! through whole layers with matrix products and is checked against them.

pub mod batch;
mod hyperdual;
mod real;
mod residual;
mod tape;

pub use hyperdual::HyperDual;
pub use real::Real;
pub use residual::{grad_params_of_residual, Jet, Partial, ResidualOperator};
pub use tape::{grad_params, ParamTape, Var};

pub(crate) use real::{sigmoid_f64, softplus_f64};

use crate::nn::MlpSpec;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AutodiffError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("gradient root must be a single scalar, got {len} values")]
    NonScalarRoot { len: usize },
    #[error("derivative of order {order} requested; at most 2 is supported")]
    UnsupportedOrder { order: usize },
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<(), AutodiffError> {
    if expected == got {
        Ok(())
    } else {
        Err(AutodiffError::DimensionMismatch { what, expected, got })
    }
}

/// Evaluates the network on hyper-dual inputs seeded along `dir1`/`dir2`.
///
/// Each output carries its value, the directional derivatives along both
/// directions and the mixed second derivative.
pub fn eval_hyperdual(
    spec: &MlpSpec,
    params: &[f64],
    x: &[f64],
    dir1: &[f64],
    dir2: &[f64],
) -> Result<Vec<HyperDual>, AutodiffError> {
    check_dim("parameters", spec.n_params(), params.len())?;
    check_dim("input", spec.input_dim(), x.len())?;
    check_dim("dir1", spec.input_dim(), dir1.len())?;
    check_dim("dir2", spec.input_dim(), dir2.len())?;
    let inputs: Vec<HyperDual> =
        x.iter().zip(dir1).zip(dir2).map(|((&v, &a), &b)| HyperDual::seeded(v, a, b)).collect();
    let p: Vec<HyperDual> = params.iter().map(|&w| HyperDual::constant(w)).collect();
    Ok(spec.forward(&p, &inputs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, Activation};

    fn small_net() -> MlpSpec {
        MlpSpec::new(vec![2, 5, 4, 1], vec![Activation::Tanh, Activation::Tanh, Activation::Linear]).unwrap()
    }

    #[test]
    fn zero_seeds_reproduce_plain_forward_bitwise() {
        let spec = small_net();
        let params = init_params(&spec, 11);
        let x = [0.3, -0.8];
        let hd = eval_hyperdual(&spec, &params, &x, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        let plain = spec.forward(&params, &x);
        assert_eq!(hd[0].value.to_bits(), plain[0].to_bits());
        assert_eq!((hd[0].d1, hd[0].d2, hd[0].d12), (0.0, 0.0, 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let spec = small_net();
        let params = init_params(&spec, 1);
        let err = eval_hyperdual(&spec, &params, &[0.1, 0.2], &[1.0], &[0.0, 1.0]).unwrap_err();
        assert_eq!(err, AutodiffError::DimensionMismatch { what: "dir1", expected: 2, got: 1 });
        assert!(eval_hyperdual(&spec, &params[1..], &[0.1, 0.2], &[1.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn swapping_directions_keeps_mixed_partial() {
        let spec = small_net();
        let params = init_params(&spec, 5);
        let x = [0.45, 0.1];
        let a = eval_hyperdual(&spec, &params, &x, &[1.0, 0.0], &[0.0, 1.0]).unwrap()[0];
        let b = eval_hyperdual(&spec, &params, &x, &[0.0, 1.0], &[1.0, 0.0]).unwrap()[0];
        assert!((a.d12 - b.d12).abs() <= 1e-15 * a.d12.abs().max(1.0));
        assert_eq!(a.d1, b.d2);
    }
}
