use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Real;

/// Value with two first-order directional derivatives and their mixed
/// second derivative.
///
/// Seeding `d1 = eᵢ`, `d2 = eⱼ` on the inputs yields `∂f/∂xᵢ`, `∂f/∂xⱼ` and
/// `∂²f/∂xᵢ∂xⱼ` in one forward pass. The component type is generic so the
/// components can themselves be tape variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperDual<T = f64> {
    pub value: T,
    pub d1: T,
    pub d2: T,
    pub d12: T,
}

impl<T: Real> HyperDual<T> {
    pub fn new(value: T, d1: T, d2: T, d12: T) -> Self {
        HyperDual { value, d1, d2, d12 }
    }

    pub fn constant(value: T) -> Self {
        let z = T::cst(0.0);
        HyperDual { value, d1: z, d2: z, d12: z }
    }

    /// Input variable seeded with direction components `s1`, `s2`.
    pub fn seeded(value: T, s1: f64, s2: f64) -> Self {
        HyperDual { value, d1: T::cst(s1), d2: T::cst(s2), d12: T::cst(0.0) }
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.value`.
    fn chain(self, f: T, df: T, d2f: T) -> Self {
        HyperDual {
            value: f,
            d1: df * self.d1,
            d2: df * self.d2,
            d12: df * self.d12 + d2f * self.d1 * self.d2,
        }
    }
}

impl<T: Real> Add for HyperDual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        HyperDual {
            value: self.value + o.value,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
            d12: self.d12 + o.d12,
        }
    }
}

impl<T: Real> Sub for HyperDual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        HyperDual {
            value: self.value - o.value,
            d1: self.d1 - o.d1,
            d2: self.d2 - o.d2,
            d12: self.d12 - o.d12,
        }
    }
}

impl<T: Real> Mul for HyperDual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        HyperDual {
            value: self.value * o.value,
            d1: self.d1 * o.value + self.value * o.d1,
            d2: self.d2 * o.value + self.value * o.d2,
            d12: self.d12 * o.value + self.d1 * o.d2 + self.d2 * o.d1 + self.value * o.d12,
        }
    }
}

impl<T: Real> Div for HyperDual<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<T: Real> Neg for HyperDual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        HyperDual { value: -self.value, d1: -self.d1, d2: -self.d2, d12: -self.d12 }
    }
}

impl<T: Real> Add<f64> for HyperDual<T> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        HyperDual { value: self.value + c, ..self }
    }
}

impl<T: Real> Sub<f64> for HyperDual<T> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        HyperDual { value: self.value - c, ..self }
    }
}

impl<T: Real> Mul<f64> for HyperDual<T> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        HyperDual { value: self.value * c, d1: self.d1 * c, d2: self.d2 * c, d12: self.d12 * c }
    }
}

impl<T: Real> Real for HyperDual<T> {
    fn cst(c: f64) -> Self {
        HyperDual::constant(T::cst(c))
    }

    fn value(&self) -> f64 {
        self.value.value()
    }

    fn tanh(self) -> Self {
        let t = self.value.tanh();
        let s = T::cst(1.0) - t * t;
        self.chain(t, s, t * s * -2.0)
    }

    fn sin(self) -> Self {
        let s = self.value.sin();
        self.chain(s, self.value.cos(), -s)
    }

    fn cos(self) -> Self {
        let c = self.value.cos();
        self.chain(c, -self.value.sin(), -c)
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    fn ln(self) -> Self {
        let r = self.value.recip();
        self.chain(self.value.ln(), r, -(r * r))
    }

    fn powi(self, n: i32) -> Self {
        let v = self.value;
        match n {
            0 => HyperDual::cst(1.0),
            1 => self,
            _ => {
                let nf = f64::from(n);
                self.chain(v.powi(n), v.powi(n - 1) * nf, v.powi(n - 2) * (nf * (nf - 1.0)))
            }
        }
    }

    fn recip(self) -> Self {
        let r = self.value.recip();
        let r2 = r * r;
        self.chain(r, -r2, r2 * r * 2.0)
    }

    fn softplus(self) -> Self {
        // σ(v) = 1 / (1 + e^{-v}), σ' = σ(1 - σ)
        let sig = (T::cst(1.0) + (-self.value).exp()).recip();
        self.chain(self.value.softplus(), sig, sig * (T::cst(1.0) - sig))
    }
}
