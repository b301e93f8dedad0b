use nalgebra::{Matrix2, RowVector2, Vector2};
use serde::{Deserialize, Serialize};

use super::LyapunovError;

/// Inverted pendulum `m l² φ̈ = m g l sin φ − β φ̇ + τ`, `|τ| ≤ τ̄`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PendulumParams {
    pub m: f64,
    pub l: f64,
    pub g: f64,
    pub beta: f64,
    pub torque_limit: f64,
    pub dt: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        let (m, l, g) = (0.15, 0.5, 9.81);
        Self { m, l, g, beta: 0.1, torque_limit: m * g * l * 60f64.to_radians().sin(), dt: 0.01 }
    }
}

pub type State = [f64; 2];

impl PendulumParams {
    pub fn validate(&self) -> Result<(), LyapunovError> {
        let fields = [("m", self.m), ("l", self.l), ("g", self.g), ("beta", self.beta), ("torque_limit", self.torque_limit), ("dt", self.dt)];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LyapunovError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Same pendulum with pole length `l`; the torque limit is rescaled so
    /// the saturation angle `asin(τ̄ / m g l)` is unchanged.
    pub fn with_length(self, l: f64) -> Self {
        Self { l, torque_limit: self.torque_limit * l / self.l, ..self }
    }

    /// Angular acceleration for torque `tau` (unsaturated).
    pub fn accel(&self, s: State, tau: f64) -> f64 {
        let inertia = self.m * self.l * self.l;
        (self.m * self.g * self.l * s[0].sin() - self.beta * s[1] + tau) / inertia
    }

    /// One semi-implicit Euler step: velocity first, then angle with the
    /// new velocity.
    pub fn euler(&self, s: State, tau: f64) -> State {
        let omega = s[1] + self.dt * self.accel(s, tau);
        [s[0] + self.dt * omega, omega]
    }

    /// Discrete-time linearization `(A, B)` of [`Self::euler`] at the
    /// upright equilibrium.
    pub fn linearize(&self) -> (Matrix2<f64>, Vector2<f64>) {
        let inertia = self.m * self.l * self.l;
        let (a, b, c, h) = (self.g / self.l, -self.beta / inertia, 1.0 / inertia, self.dt);
        let am = Matrix2::new(1.0 + h * h * a, h * (1.0 + h * b), h * a, 1.0 + h * b);
        (am, Vector2::new(h * h * c, h * c))
    }
}

/// Saturated linear state feedback `τ = clamp(−K x, ±τ̄)` on a pendulum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoop {
    pub params: PendulumParams,
    pub gain: [f64; 2],
}

impl ClosedLoop {
    /// LQR closed loop with `Q = I`, `R = 1`.
    pub fn lqr(params: PendulumParams) -> Result<Self, LyapunovError> {
        params.validate()?;
        let (a, b) = params.linearize();
        let k = lqr_gain(&a, &b, &Matrix2::identity(), 1.0)?;
        Ok(Self { params, gain: [k[0], k[1]] })
    }

    pub fn torque(&self, s: State) -> f64 {
        let lim = self.params.torque_limit;
        (-(self.gain[0] * s[0] + self.gain[1] * s[1])).clamp(-lim, lim)
    }

    pub fn step(&self, s: State) -> State {
        self.params.euler(s, self.torque(s))
    }

    /// State after `steps` steps; stops early once the state is no longer
    /// finite.
    pub fn simulate(&self, mut s: State, steps: usize) -> State {
        for _ in 0..steps {
            s = self.step(s);
            if !(s[0].is_finite() && s[1].is_finite()) {
                break;
            }
        }
        s
    }
}

const DARE_TOL: f64 = 1e-12;
const DARE_MAX_ITERS: usize = 100_000;

/// Iterates the discrete Riccati recursion to its fixed point and returns
/// `(P, K)` with `u = −K x`. Convergence is measured relative to
/// `max(1, max|P|)`.
pub fn dare(a: &Matrix2<f64>, b: &Vector2<f64>, q: &Matrix2<f64>, r: f64) -> Result<(Matrix2<f64>, RowVector2<f64>), LyapunovError> {
    let gain = |p: &Matrix2<f64>| -> RowVector2<f64> { (b.transpose() * p * a) / (r + (b.transpose() * p * b)[0]) };
    let mut p = *q;
    for _ in 0..DARE_MAX_ITERS {
        let k = gain(&p);
        let next = q + a.transpose() * p * a - a.transpose() * p * b * k;
        let next = (next + next.transpose()) * 0.5;
        let delta = (next - p).abs().max();
        p = next;
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
        if delta <= DARE_TOL * p.abs().max().max(1.0) {
            return Ok((p, gain(&p)));
        }
    }
    Err(LyapunovError::DareNotConverged { iters: DARE_MAX_ITERS })
}

/// Infinite-horizon discrete LQR gain.
pub fn lqr_gain(a: &Matrix2<f64>, b: &Vector2<f64>, q: &Matrix2<f64>, r: f64) -> Result<RowVector2<f64>, LyapunovError> {
    if !(r > 0.0) {
        return Err(LyapunovError::InvalidParams(format!("R must be positive definite, got {r}")));
    }
    Ok(dare(a, b, q, r)?.1)
}

/// Spectral radius of a real 2×2 matrix from its trace and determinant.
pub fn spectral_radius(m: &Matrix2<f64>) -> f64 {
    let (tr, det) = (m.trace(), m.determinant());
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (tr / 2.0 + s).abs().max((tr / 2.0 - s).abs())
    } else {
        det.sqrt()
    }
}
