use std::f64::consts::PI;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::PdeError;
use crate::autodiff::batch::Channels;
use crate::autodiff::{HyperDual, Jet, Partial, Real, ResidualOperator};
use crate::nn::NetCheckpoint;

/// Axis-aligned space-time box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x: (f64, f64),
    pub t: (f64, f64),
}

impl Domain {
    /// Maps a point of the unit square onto the box.
    pub fn from_unit(&self, u: [f64; 2]) -> [f64; 2] {
        [self.x.0 + u[0] * (self.x.1 - self.x.0), self.t.0 + u[1] * (self.t.1 - self.t.0)]
    }

    pub fn contains_strictly(&self, p: [f64; 2]) -> bool {
        p[0] > self.x.0 && p[0] < self.x.1 && p[1] > self.t.0 && p[1] < self.t.1
    }

    pub fn area(&self) -> f64 {
        (self.x.1 - self.x.0) * (self.t.1 - self.t.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeEnv {
    Diffusion,
    Wave,
    Burgers,
}

impl PdeEnv {
    pub fn name(self) -> &'static str {
        match self {
            PdeEnv::Diffusion => "diffusion",
            PdeEnv::Wave => "wave",
            PdeEnv::Burgers => "burgers",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PdeKind {
    /// `u_t = u_xx + (z²π² − 1) e^{−t} sin(zπx)` on `[−1/z, 1/z] × [0, 1]`.
    Diffusion { z: f64 },
    /// `u_tt − 4z² u_xx = 0` on `[0, 1] × [0, 1]`.
    Wave { z: i64 },
    /// `u_t + u u_x = ν u_xx` on `[−1, 1] × [0, 1]`.
    Burgers { nu: f64 },
}

/// Which edge of the box a condition lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Initial,
    Left,
    Right,
}

/// What a condition constrains on its edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// `u = g(x, t)`.
    Value,
    /// `u_t = 0`.
    Velocity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub edge: Edge,
    pub constraint: Constraint,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Reference {
    Exact,
    Network(NetCheckpoint),
    Missing,
}

/// One PDE instance: operator, domain, conditions and reference solution.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeProblem {
    pub kind: PdeKind,
    pub domain: Domain,
    pub conditions: Vec<Condition>,
    pub boundary_weight: f64,
    pub reference: Reference,
}

const VALUE_IC: Condition = Condition { edge: Edge::Initial, constraint: Constraint::Value };
const LEFT: Condition = Condition { edge: Edge::Left, constraint: Constraint::Value };
const RIGHT: Condition = Condition { edge: Edge::Right, constraint: Constraint::Value };

pub fn make_diffusion(z: f64) -> Result<PdeProblem, PdeError> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(PdeError::InvalidParameter { pde: "diffusion", value: z });
    }
    Ok(PdeProblem {
        kind: PdeKind::Diffusion { z },
        domain: Domain { x: (-1.0 / z, 1.0 / z), t: (0.0, 1.0) },
        conditions: vec![VALUE_IC, LEFT, RIGHT],
        boundary_weight: 1.0,
        reference: Reference::Exact,
    })
}

pub fn make_wave(z: i64) -> Result<PdeProblem, PdeError> {
    if z <= 0 {
        return Err(PdeError::InvalidParameter { pde: "wave", value: z as f64 });
    }
    Ok(PdeProblem {
        kind: PdeKind::Wave { z },
        domain: Domain { x: (0.0, 1.0), t: (0.0, 1.0) },
        conditions: vec![VALUE_IC, Condition { edge: Edge::Initial, constraint: Constraint::Velocity }, LEFT, RIGHT],
        boundary_weight: 1.0,
        reference: Reference::Exact,
    })
}

/// Burgers has no closed form; attach a trained reference with
/// [`PdeProblem::with_reference`].
pub fn make_burgers(nu: f64) -> Result<PdeProblem, PdeError> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(PdeError::InvalidParameter { pde: "burgers", value: nu });
    }
    Ok(PdeProblem {
        kind: PdeKind::Burgers { nu },
        domain: Domain { x: (-1.0, 1.0), t: (0.0, 1.0) },
        conditions: vec![VALUE_IC, LEFT, RIGHT],
        boundary_weight: 1.0,
        reference: Reference::Missing,
    })
}

/// Builds the problem for `env` at randomization parameter `z`
/// (rounded for the integer-valued wave parameter).
pub fn make_problem(env: PdeEnv, z: f64) -> Result<PdeProblem, PdeError> {
    match env {
        PdeEnv::Diffusion => make_diffusion(z),
        PdeEnv::Wave => make_wave(z.round() as i64),
        PdeEnv::Burgers => make_burgers(z),
    }
}

impl PdeProblem {
    pub fn env(&self) -> PdeEnv {
        match self.kind {
            PdeKind::Diffusion { .. } => PdeEnv::Diffusion,
            PdeKind::Wave { .. } => PdeEnv::Wave,
            PdeKind::Burgers { .. } => PdeEnv::Burgers,
        }
    }

    pub fn name(&self) -> &'static str {
        self.env().name()
    }

    /// The randomization parameter `z` (viscosity for Burgers).
    pub fn z(&self) -> f64 {
        match self.kind {
            PdeKind::Diffusion { z } => z,
            PdeKind::Wave { z } => z as f64,
            PdeKind::Burgers { nu } => nu,
        }
    }

    pub fn with_boundary_weight(mut self, w: f64) -> Self {
        self.boundary_weight = w;
        self
    }

    pub fn with_reference(mut self, net: NetCheckpoint) -> Self {
        self.reference = Reference::Network(net);
        self
    }

    pub fn has_closed_form(&self) -> bool {
        !matches!(self.kind, PdeKind::Burgers { .. })
    }

    /// Closed-form solution, generic so derivatives can be taken with
    /// hyper-dual inputs. `None` for Burgers.
    pub fn exact<T: Real>(&self, x: T, t: T) -> Option<T> {
        match self.kind {
            PdeKind::Diffusion { z } => Some((x * (z * PI)).sin() * (-t).exp()),
            PdeKind::Wave { z } => {
                let z = z as f64;
                Some(
                    (x * PI).sin() * (t * (2.0 * z * PI)).cos()
                        + (x * (4.0 * PI)).sin() * (t * (8.0 * z * PI)).cos() * 0.5,
                )
            }
            PdeKind::Burgers { .. } => None,
        }
    }

    /// Jet of the closed-form solution at `p` (full Hessian).
    pub fn exact_jet(&self, p: [f64; 2]) -> Option<Jet<f64>> {
        let mut jet = Jet::zero();
        for (a, b) in [(0, 0), (1, 1), (0, 1)] {
            let seed = |k: usize, axis: usize| if k == axis { 1.0 } else { 0.0 };
            let x = HyperDual::seeded(p[0], seed(0, a), seed(0, b));
            let t = HyperDual::seeded(p[1], seed(1, a), seed(1, b));
            let u = self.exact(x, t)?;
            jet.u = u.value;
            jet.grad[a] = u.d1;
            jet.grad[b] = u.d2;
            jet.hess[a][b] = u.d12;
            jet.hess[b][a] = u.d12;
        }
        Some(jet)
    }

    /// Target value of a `Value` condition at `(x, t)`.
    pub fn condition_target(&self, cond: Condition, x: f64) -> f64 {
        match (cond.constraint, cond.edge) {
            (Constraint::Velocity, _) | (_, Edge::Left) | (_, Edge::Right) => 0.0,
            (Constraint::Value, Edge::Initial) => match self.kind {
                PdeKind::Diffusion { z } => (z * PI * x).sin(),
                PdeKind::Wave { .. } => (PI * x).sin() + 0.5 * (4.0 * PI * x).sin(),
                PdeKind::Burgers { .. } => -(PI * x).sin(),
            },
        }
    }

    /// Whether `p` lies exactly on the edge of `cond`.
    pub fn on_edge(&self, cond: Condition, p: [f64; 2]) -> bool {
        match cond.edge {
            Edge::Initial => p[1] == self.domain.t.0 && p[0] >= self.domain.x.0 && p[0] <= self.domain.x.1,
            Edge::Left => p[0] == self.domain.x.0 && p[1] >= self.domain.t.0 && p[1] <= self.domain.t.1,
            Edge::Right => p[0] == self.domain.x.1 && p[1] >= self.domain.t.0 && p[1] <= self.domain.t.1,
        }
    }

    /// Derivative channels the interior residual needs from the batched
    /// kernel (axis 0 = x, axis 1 = t).
    pub fn interior_channels(&self) -> Channels {
        match self.kind {
            PdeKind::Diffusion { .. } | PdeKind::Burgers { .. } => Channels::new(&[0, 1], &[0]),
            PdeKind::Wave { .. } => Channels::new(&[0, 1], &[0, 1]),
        }
    }

    /// Residual and its partials with respect to `(u, u_x, u_t, u_xx, u_tt)`.
    pub fn residual_terms(&self, p: [f64; 2], c: [f64; 5]) -> (f64, [f64; 5]) {
        let [u, ux, ut, uxx, utt] = c;
        match self.kind {
            PdeKind::Diffusion { z } => {
                let forcing = (z * z * PI * PI - 1.0) * (-p[1]).exp() * (z * PI * p[0]).sin();
                (ut - uxx - forcing, [0.0, 0.0, 1.0, -1.0, 0.0])
            }
            PdeKind::Wave { z } => {
                let k = 4.0 * (z * z) as f64;
                (utt - k * uxx, [0.0, 0.0, 0.0, -k, 1.0])
            }
            PdeKind::Burgers { nu } => (ut + u * ux - nu * uxx, [ux, u, 1.0, -nu, 0.0]),
        }
    }

    /// Residuals at the columns of `xs` for a model returning channel jets.
    pub fn residuals(&self, xs: ArrayView2<'_, f64>, jets: ArrayView2<'_, f64>) -> Vec<f64> {
        let ch = self.interior_channels();
        let n = xs.ncols();
        (0..n)
            .map(|j| self.residual_terms([xs[[0, j]], xs[[1, j]]], channel_comps(&ch, jets, n, j)).0)
            .collect()
    }
}

/// `(u, u_x, u_t, u_xx, u_tt)` of column `j` from a channel-stacked row.
pub(crate) fn channel_comps(ch: &Channels, jets: ArrayView2<'_, f64>, n: usize, j: usize) -> [f64; 5] {
    let get = |c: Option<usize>| c.map_or(0.0, |c| jets[[0, c * n + j]]);
    [
        jets[[0, j]],
        get(ch.first_index(0)),
        get(ch.first_index(1)),
        get(ch.second_index(0)),
        get(ch.second_index(1)),
    ]
}

/// Channel index carrying component `k` of `(u, u_x, u_t, u_xx, u_tt)`.
pub(crate) fn component_channel(ch: &Channels, k: usize) -> Option<usize> {
    match k {
        0 => Some(0),
        1 => ch.first_index(0),
        2 => ch.first_index(1),
        3 => ch.second_index(0),
        _ => ch.second_index(1),
    }
}

impl ResidualOperator for PdeProblem {
    fn partials(&self) -> Vec<Partial> {
        match self.kind {
            PdeKind::Diffusion { .. } => vec![Partial::UT, Partial::UXX],
            PdeKind::Wave { .. } => vec![Partial::UTT, Partial::UXX],
            PdeKind::Burgers { .. } => vec![Partial::U, Partial::UT, Partial::UX, Partial::UXX],
        }
    }

    fn residual<T: Real>(&self, p: [f64; 2], jet: &Jet<T>) -> T {
        match self.kind {
            PdeKind::Diffusion { z } => {
                let forcing = (z * z * PI * PI - 1.0) * (-p[1]).exp() * (z * PI * p[0]).sin();
                jet.u_t() - jet.u_xx() - forcing
            }
            PdeKind::Wave { z } => jet.u_tt() - jet.u_xx() * (4.0 * (z * z) as f64),
            PdeKind::Burgers { nu } => jet.u_t() + jet.u * jet.u_x() - jet.u_xx() * nu,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constructors_validate_parameters() {
        assert!(make_diffusion(0.0).is_err());
        assert!(make_diffusion(-1.0).is_err());
        assert!(make_wave(0).is_err());
        assert!(make_burgers(0.0).is_err());
        let d = make_diffusion(2.0).unwrap();
        assert_eq!(d.domain, Domain { x: (-0.5, 0.5), t: (0.0, 1.0) });
        assert_eq!(make_wave(2).unwrap().conditions.len(), 4);
    }

    #[test]
    fn diffusion_closed_form_values() {
        for z in [1.0, 1.7, 3.0] {
            let p = make_diffusion(z).unwrap();
            assert_eq!(p.exact(0.0, 0.37), Some(0.0));
            assert!((p.exact(1.0 / (2.0 * z), 0.0).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn wave_closed_form_matches_conditions() {
        let p = make_wave(2).unwrap();
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            let ic = p.condition_target(VALUE_IC, x);
            assert!((p.exact(x, 0.0).unwrap() - ic).abs() < 1e-14);
            assert!(p.exact(0.0, x).unwrap().abs() < 1e-14);
            assert!(p.exact_jet([x, 0.0]).unwrap().u_t().abs() < 1e-12);
        }
    }

    #[test]
    fn burgers_initial_condition() {
        let p = make_burgers(0.01 / PI).unwrap();
        assert_eq!(p.condition_target(VALUE_IC, 0.0), 0.0);
        assert!((p.condition_target(VALUE_IC, -0.5) - 1.0).abs() < 1e-15);
        assert!(p.exact(0.1, 0.1).is_none());
    }

    #[test]
    fn closed_forms_satisfy_their_residuals() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for p in [make_diffusion(1.0).unwrap(), make_diffusion(2.6).unwrap(), make_wave(1).unwrap(), make_wave(2).unwrap()]
        {
            for _ in 0..100 {
                let pt = p.domain.from_unit([rng.random(), rng.random()]);
                let jet = p.exact_jet(pt).unwrap();
                let f = p.residual(pt, &jet);
                assert!(f.abs() < 1e-8, "{:?} at {pt:?}: {f}", p.kind);
                let c = [jet.u, jet.u_x(), jet.u_t(), jet.u_xx(), jet.u_tt()];
                assert!((p.residual_terms(pt, c).0 - f).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn residual_partials_match_finite_differences() {
        let p = make_burgers(0.02).unwrap();
        let pt = [0.3, 0.4];
        let c = [0.5, -1.2, 0.7, 2.0, -0.3];
        let (_, d) = p.residual_terms(pt, c);
        for k in 0..5 {
            let mut cp = c;
            let mut cm = c;
            cp[k] += 1e-6;
            cm[k] -= 1e-6;
            let fd = (p.residual_terms(pt, cp).0 - p.residual_terms(pt, cm).0) / 2e-6;
            assert!((fd - d[k]).abs() < 1e-8);
        }
    }
}
