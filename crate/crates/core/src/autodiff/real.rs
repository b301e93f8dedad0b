use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar arithmetic shared by `f64`, hyper-dual numbers and tape variables.
///
/// Network and residual code is written once against this trait and then
/// evaluated on plain floats, on hyper-duals (input derivatives) or on tape
/// variables (parameter gradients), including nestings of the latter two.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    /// A constant carrying no derivative information.
    fn cst(c: f64) -> Self;
    /// The primal value.
    fn value(&self) -> f64;

    fn tanh(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn recip(self) -> Self;

    /// `ln(1 + e^x)`.
    fn softplus(self) -> Self;
}

pub(crate) fn softplus_f64(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid_f64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Real for f64 {
    fn cst(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn recip(self) -> Self {
        f64::recip(self)
    }
    fn softplus(self) -> Self {
        softplus_f64(self)
    }
}
