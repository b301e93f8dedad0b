use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClosedLoop, LyapunovError, State};
use crate::nn::{AdamState, LyapunovNet};
use crate::par::Exec;

/// Symmetric state box `[−φ_max, φ_max] × [−ω_max, ω_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBox {
    pub phi: f64,
    pub omega: f64,
}

impl Default for StateBox {
    fn default() -> Self {
        Self { phi: 2.0 * std::f64::consts::FRAC_PI_3, omega: 4.0 }
    }
}

impl StateBox {
    pub fn scaled(&self, s: f64) -> Self {
        Self { phi: self.phi * s, omega: self.omega * s }
    }

    pub fn contains(&self, x: State) -> bool {
        x[0].abs() <= self.phi && x[1].abs() <= self.omega
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        [rng.random_range(-self.phi..=self.phi), rng.random_range(-self.omega..=self.omega)]
    }
}

pub(crate) fn columns(points: &[State]) -> Array2<f64> {
    let mut m = Array2::zeros((2, points.len()));
    for (j, p) in points.iter().enumerate() {
        m[[0, j]] = p[0];
        m[[1, j]] = p[1];
    }
    m
}

pub fn net_values(net: &LyapunovNet, points: &[State], exec: Exec) -> Vec<f64> {
    net.values(columns(points).view(), exec)
}

pub const PROPOSAL_BUDGET: usize = 1_000_000;
const MIN_ACCEPTANCE: f64 = 1e-4;
const PROPOSAL_BATCH: usize = 4096;

/// Rejection sampling of `count` states from `{x ∈ box : v(x) ≤ α c}`.
///
/// Proposals are drawn in batches, so the result depends only on the rng
/// stream. Fails if fewer than one proposal in 10⁴ is accepted over the
/// first 10⁶.
pub fn sample_level_set<R: Rng + ?Sized>(
    net: &LyapunovNet,
    c: f64,
    alpha: f64,
    count: usize,
    bounds: &StateBox,
    rng: &mut R,
    exec: Exec,
) -> Result<Vec<State>, LyapunovError> {
    if !(c > 0.0) {
        return Err(LyapunovError::InvalidLevel { c });
    }
    if !(alpha >= 1.0) {
        return Err(LyapunovError::InvalidAlpha { alpha });
    }
    let level = alpha * c;
    let mut accepted = Vec::with_capacity(count);
    let mut proposals = 0usize;
    while accepted.len() < count {
        if proposals >= PROPOSAL_BUDGET && (accepted.len() as f64) < MIN_ACCEPTANCE * proposals as f64 {
            return Err(LyapunovError::DegenerateLevelSet { accepted: accepted.len(), proposals });
        }
        let batch: Vec<State> = (0..PROPOSAL_BATCH).map(|_| bounds.draw(rng)).collect();
        proposals += batch.len();
        let v = net_values(net, &batch, exec);
        accepted.extend(batch.iter().zip(&v).filter(|(_, v)| **v <= level).map(|(x, _)| *x));
    }
    accepted.truncate(count);
    Ok(accepted)
}

/// Terminal states after simulating each of `xs` for `horizon` steps.
pub fn simulate_batch(system: &ClosedLoop, xs: &[State], horizon: usize, exec: Exec) -> Vec<State> {
    exec.map(xs, |x| system.simulate(*x, horizon))
}

/// `true` for states whose `horizon`-step terminal state lies in `V(c)`.
pub fn label_batch(system: &ClosedLoop, net: &LyapunovNet, xs: &[State], c: f64, horizon: usize, exec: Exec) -> Vec<bool> {
    let terminal = simulate_batch(system, xs, horizon, exec);
    let finite: Vec<State> = terminal.iter().map(|s| if s[0].is_finite() && s[1].is_finite() { *s } else { [0.0; 2] }).collect();
    let v = net_values(net, &finite, exec);
    terminal.iter().zip(v).map(|(s, v)| s[0].is_finite() && s[1].is_finite() && v <= c).collect()
}

/// Mean hinge loss `max(0, 1 − y (c − v) / c)` with `y = ±1` from `labels`,
/// and its derivative with respect to each `v`.
pub fn hinge(values: &[f64], labels: &[bool], c: f64) -> (f64, Vec<f64>) {
    let n = values.len() as f64;
    let mut loss = 0.0;
    let grads = values
        .iter()
        .zip(labels)
        .map(|(v, l)| {
            let y = if *l { 1.0 } else { -1.0 };
            let margin = 1.0 - y * (c - v) / c;
            if margin > 0.0 {
                loss += margin / n;
                y / (c * n)
            } else {
                0.0
            }
        })
        .collect();
    (loss, grads)
}

/// Full-batch Adam steps on the hinge loss; returns the loss before each
/// step.
pub fn classifier_update(
    net: &mut LyapunovNet,
    adam: &mut AdamState,
    xs: &[State],
    labels: &[bool],
    c: f64,
    steps: usize,
) -> Result<Vec<f64>, LyapunovError> {
    if xs.is_empty() {
        return Err(LyapunovError::EmptyBatch);
    }
    let cols = columns(xs);
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let mut loss = 0.0;
        let (_, grad) = net.value_and_grad(cols.view(), |v| {
            let (l, g) = hinge(v, labels, c);
            loss = l;
            g
        });
        if !loss.is_finite() {
            return Err(LyapunovError::NonFiniteLoss { step });
        }
        losses.push(loss);
        adam.step(&mut net.params, &grad)?;
    }
    Ok(losses)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LevelUpdate {
    Raised(f64),
    /// `S` was empty or only contained the origin; the level is kept.
    Stalled,
}

/// `c_{k+1} = max_{x ∈ S} v(x)`.
pub fn update_level(net: &LyapunovNet, safe: &[State], exec: Exec) -> LevelUpdate {
    let max = net_values(net, safe, exec).into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 && max.is_finite() {
        LevelUpdate::Raised(max)
    } else {
        LevelUpdate::Stalled
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::PendulumParams;
    use crate::nn::{AdamConfig, MlpSpec};

    /// `g ≡ 0`, so `v = ε‖x‖²`.
    fn quadratic(eps: f64) -> LyapunovNet {
        let spec = MlpSpec::dense(2, &[4], 3, crate::nn::Activation::Tanh, crate::nn::Activation::Linear);
        LyapunovNet::new(spec.clone(), vec![0.0; spec.n_params()], eps).unwrap()
    }

    #[test]
    fn accepted_points_are_in_the_scaled_level_set() {
        let net = LyapunovNet::init(3);
        let mut rng = crate::seed::stream(0, "ls", 0);
        let c = 0.2;
        let xs = sample_level_set(&net, c, 1.5, 300, &StateBox::default(), &mut rng, Exec::default()).unwrap();
        assert_eq!(xs.len(), 300);
        assert!(xs.iter().all(|x| net.value(*x) <= 1.5 * c));
        let ys = sample_level_set(&net, c, 1.0, 100, &StateBox::default(), &mut rng, Exec::default()).unwrap();
        assert!(ys.iter().all(|x| net.sublevel(*x, c)));
    }

    #[test]
    fn disk_acceptance_matches_area_ratio() {
        let net = quadratic(1.0);
        let bounds = StateBox { phi: 2.0, omega: 2.0 };
        let mut rng = crate::seed::stream(1, "ls", 0);
        let n = 200_000;
        let batch: Vec<State> = (0..n).map(|_| bounds.draw(&mut rng)).collect();
        let accepted = net_values(&net, &batch, Exec::default()).iter().filter(|v| **v <= 1.0).count();
        let p = std::f64::consts::PI / 16.0;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((accepted as f64 / n as f64 - p).abs() < 3.0 * sigma);
    }

    #[test]
    fn tiny_level_set_is_degenerate() {
        let net = quadratic(1.0);
        let mut rng = crate::seed::stream(2, "ls", 0);
        let err = sample_level_set(&net, 1e-9, 1.0, 10, &StateBox::default(), &mut rng, Exec::default()).unwrap_err();
        assert!(matches!(err, LyapunovError::DegenerateLevelSet { .. }));
        assert!(matches!(
            sample_level_set(&net, 1.0, 0.9, 10, &StateBox::default(), &mut rng, Exec::default()),
            Err(LyapunovError::InvalidAlpha { .. })
        ));
    }

    #[test]
    fn labels_match_hand_simulation() {
        let system = ClosedLoop::lqr(PendulumParams::default()).unwrap();
        let net = quadratic(1.0);
        let xs = [[0.0, 0.0], [0.1, 0.0], [std::f64::consts::PI, 0.0], [-2.0, 3.9], [0.3, -0.5]];
        let c = 1e-4;
        let labels = label_batch(&system, &net, &xs, c, 100, Exec::Sequential);
        let by_hand: Vec<bool> = xs
            .iter()
            .map(|x| {
                let mut s = *x;
                for _ in 0..100 {
                    s = system.step(s);
                }
                s[0] * s[0] + s[1] * s[1] <= c
            })
            .collect();
        assert_eq!(labels, by_hand);
        assert!(labels[0]);
        assert!(!labels[2]);
    }

    #[test]
    fn hinge_values_and_grads() {
        let (l, g) = hinge(&[0.2, 0.5, 3.0], &[true, true, false], 1.0);
        // margins: 0.2, 0.5, −1.0 (inactive)
        assert!((l - 0.7 / 3.0).abs() < 1e-15);
        assert_eq!(g, vec![1.0 / 3.0, 1.0 / 3.0, 0.0]);
        let (l0, g0) = hinge(&[-1.0, 4.0], &[true, false], 2.0);
        assert_eq!((l0, g0), (0.0, vec![0.0, 0.0]));
    }

    #[test]
    fn separated_batch_leaves_params_unchanged() {
        let mut net = quadratic(1.0);
        let before = net.params.clone();
        let mut adam = AdamState::new(net.params.len(), AdamConfig::default());
        // v = 0 and v = 9 at level 1: margins −1 and −7.
        let losses = classifier_update(&mut net, &mut adam, &[[0.0, 0.0], [3.0, 0.0]], &[true, false], 1.0, 3).unwrap();
        assert_eq!(losses, vec![0.0; 3]);
        assert_eq!(net.params, before);
    }

    #[test]
    fn misclassified_positive_is_pulled_in() {
        let mut net = LyapunovNet::init(5);
        let x = [[1.5, 2.0]];
        let c = 0.5 * net.value(x[0]);
        let mut adam = AdamState::new(net.params.len(), AdamConfig::default());
        let losses = classifier_update(&mut net, &mut adam, &x, &[true], c, 50).unwrap();
        assert!(losses[49] < losses[0]);
        assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{losses:?}");
    }

    #[test]
    fn flipped_labels_negate_gradient_inside_the_hinge() {
        let net = LyapunovNet::init(7);
        let xs = [[0.3, -0.2], [0.5, 0.5], [-0.4, 1.0]];
        let v: Vec<f64> = xs.iter().map(|x| net.value(*x)).collect();
        // Pick c so every margin is active for both labelings: |c − v| < c.
        let c = v.iter().cloned().fold(0.0, f64::max);
        let cols = columns(&xs);
        let grad = |labels: [bool; 3]| net.value_and_grad(cols.view(), |v| hinge(v, &labels, c).1).1;
        let (a, b) = (grad([true, false, true]), grad([false, true, false]));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn level_update_is_exact_max() {
        let net = quadratic(1.0);
        let s = [[0.2f64.sqrt(), 0.0], [0.0, 0.5f64.sqrt()], [0.4f64.sqrt(), 0.0]];
        let LevelUpdate::Raised(c) = update_level(&net, &s, Exec::Sequential) else { panic!() };
        let expect = s.iter().map(|x| net.value(*x)).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(c, expect);
        assert!((c - 0.5).abs() < 1e-15);
        assert!(s.iter().all(|x| net.sublevel(*x, c)));
        assert_eq!(update_level(&net, &[[0.0, 0.0]], Exec::Sequential), LevelUpdate::Stalled);
        assert_eq!(update_level(&net, &[], Exec::Sequential), LevelUpdate::Stalled);
    }
}
