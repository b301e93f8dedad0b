//! The five base collocation samplers and the ratio-driven mixture.

mod rad;
mod sequences;

pub use rad::{rad_sample, rad_weights, RadConfig};
pub use sequences::{halton_point, radical_inverse, sobol_point};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::MlpSpec;
use crate::par::Exec;
use crate::pde::{self, PdeProblem};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SamplerError {
    #[error("RAD needs the current network")]
    MissingModel,
    #[error("sampler count must be at least 1")]
    ZeroCount,
    #[error("{sampler} pool has {have} points, {need} requested")]
    InsufficientPool { sampler: &'static str, need: usize, have: usize },
    #[error("invalid ratio vector {values:?}: {reason}")]
    InvalidRatio { values: Vec<f64>, reason: &'static str },
    #[error("empty point set")]
    EmptySet,
}

/// Base samplers, in the fixed order that defines the RL state layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerId {
    UniformGrid,
    Random,
    Sobol,
    Halton,
    Rad,
}

pub const N_SAMPLERS: usize = 5;

impl SamplerId {
    pub const ALL: [SamplerId; N_SAMPLERS] =
        [SamplerId::UniformGrid, SamplerId::Random, SamplerId::Sobol, SamplerId::Halton, SamplerId::Rad];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SamplerId::UniformGrid => "uniform_grid",
            SamplerId::Random => "random",
            SamplerId::Sobol => "sobol",
            SamplerId::Halton => "halton",
            SamplerId::Rad => "rad",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Mixture weights over the samplers; nonnegative and summing to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioVector([f64; N_SAMPLERS]);

const RATIO_TOL: f64 = 1e-9;

impl RatioVector {
    pub fn new(a: [f64; N_SAMPLERS]) -> Result<Self, SamplerError> {
        let bad = |reason| Err(SamplerError::InvalidRatio { values: a.to_vec(), reason });
        if a.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("entries must be finite and nonnegative");
        }
        if (a.iter().sum::<f64>() - 1.0).abs() > RATIO_TOL {
            return bad("entries must sum to 1");
        }
        Ok(Self(a))
    }

    pub fn uniform() -> Self {
        Self([1.0 / N_SAMPLERS as f64; N_SAMPLERS])
    }

    pub fn one_hot(id: SamplerId) -> Self {
        let mut a = [0.0; N_SAMPLERS];
        a[id.index()] = 1.0;
        Self(a)
    }

    /// Softmax of `logits` (max-shifted).
    pub fn softmax(logits: &[f64]) -> Self {
        assert_eq!(logits.len(), N_SAMPLERS);
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut a = [0.0; N_SAMPLERS];
        for (ai, l) in a.iter_mut().zip(logits) {
            *ai = (l - max).exp();
        }
        let s: f64 = a.iter().sum();
        a.iter_mut().for_each(|v| *v /= s);
        Self(a)
    }

    pub fn as_array(&self) -> [f64; N_SAMPLERS] {
        self.0
    }
}

/// Splits `count` by largest-remainder rounding of `a · count`; ties in the
/// fractional part go to the lower sampler index.
pub fn allocate(a: &RatioVector, count: usize) -> [usize; N_SAMPLERS] {
    let quotas = a.0.map(|v| v * count as f64);
    let mut alloc = quotas.map(|q| q.floor() as usize);
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..N_SAMPLERS).collect();
    order.sort_by(|&i, &j| (quotas[j] - quotas[j].floor()).total_cmp(&(quotas[i] - quotas[i].floor())).then(i.cmp(&j)));
    for &i in order.iter().take(count.saturating_sub(assigned)) {
        alloc[i] += 1;
    }
    alloc
}

/// Draws `alloc[j]` points uniformly without replacement from each pool.
pub fn compose_mixture<R: Rng + ?Sized>(
    a: &RatioVector,
    pools: &[Vec<[f64; 2]>; N_SAMPLERS],
    count: usize,
    rng: &mut R,
) -> Result<Vec<[f64; 2]>, SamplerError> {
    let alloc = allocate(a, count);
    let mut out = Vec::with_capacity(count);
    for (id, (pool, &n)) in SamplerId::ALL.iter().zip(pools.iter().zip(&alloc)) {
        if pool.len() < n {
            return Err(SamplerError::InsufficientPool { sampler: id.name(), need: n, have: pool.len() });
        }
        if n > 0 {
            out.extend(rand::seq::index::sample(rng, pool.len(), n).into_iter().map(|i| pool[i]));
        }
    }
    Ok(out)
}

/// Stream positions for the quasi-random samplers within one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerBank {
    pub rad: RadConfig,
    /// Start Sobol/Halton from the first point on every call instead of
    /// continuing the stream.
    pub restart: bool,
    next: [u64; 2],
}

impl Default for SamplerBank {
    fn default() -> Self {
        Self::new(RadConfig::default(), false)
    }
}

impl SamplerBank {
    pub fn new(rad: RadConfig, restart: bool) -> Self {
        Self { rad, restart, next: [1, 1] }
    }

    fn take(&mut self, slot: usize, count: usize) -> std::ops::Range<u64> {
        let start = if self.restart { 1 } else { self.next[slot] };
        self.next[slot] = start + count as u64;
        start..start + count as u64
    }

    /// `count` interior points from sampler `id`. RAD needs the current
    /// network as `model`.
    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        id: SamplerId,
        problem: &PdeProblem,
        count: usize,
        model: Option<(&MlpSpec, &[f64])>,
        rng: &mut R,
    ) -> Result<Vec<[f64; 2]>, SamplerError> {
        if count == 0 {
            return Err(SamplerError::ZeroCount);
        }
        let d = problem.domain;
        Ok(match id {
            SamplerId::UniformGrid => grid(count).into_iter().map(|u| d.from_unit(u)).collect(),
            SamplerId::Random => pde::sample_interior(&d, count, rng),
            SamplerId::Sobol => self.take(0, count).map(|i| d.from_unit(sobol_point(i))).collect(),
            SamplerId::Halton => self.take(1, count).map(|i| d.from_unit(halton_point(i))).collect(),
            SamplerId::Rad => {
                let (spec, params) = model.ok_or(SamplerError::MissingModel)?;
                rad_sample(&d, &self.rad, count, |pool| pde::residuals(problem, spec, params, pool, Exec::default()), rng)
            }
        })
    }
}

/// Cell-centred `⌈√count⌉ × ⌈√count⌉` lattice on the unit square, row by
/// row in `t`, truncated to `count`.
pub fn grid(count: usize) -> Vec<[f64; 2]> {
    let n = (count as f64).sqrt().ceil() as usize;
    let n = if n * n < count { n + 1 } else { n };
    (0..count).map(|k| [((k % n) as f64 + 0.5) / n as f64, ((k / n) as f64 + 0.5) / n as f64]).collect()
}

/// Mean squared interior residual of the network over `points`.
pub fn residual_summary(problem: &PdeProblem, spec: &MlpSpec, params: &[f64], points: &[[f64; 2]]) -> Result<f64, SamplerError> {
    if points.is_empty() {
        return Err(SamplerError::EmptySet);
    }
    let r = pde::residuals(problem, spec, params, points, Exec::default());
    Ok(r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, Activation};
    use crate::pde::make_diffusion;
    use proptest::prelude::*;

    #[test]
    fn largest_remainder_examples() {
        let a = RatioVector::new([0.5, 0.2, 0.1, 0.1, 0.1]).unwrap();
        assert_eq!(allocate(&a, 50), [25, 10, 5, 5, 5]);
        assert_eq!(allocate(&RatioVector::uniform(), 50), [10; 5]);
        assert_eq!(allocate(&RatioVector::uniform(), 7), [2, 2, 1, 1, 1]);
        assert_eq!(allocate(&RatioVector::one_hot(SamplerId::Sobol), 50), [0, 0, 50, 0, 0]);
    }

    #[test]
    fn ratio_validation() {
        assert!(RatioVector::new([0.5, 0.5, 0.0, 0.0, 0.1]).is_err());
        assert!(RatioVector::new([1.5, -0.5, 0.0, 0.0, 0.0]).is_err());
        assert!(RatioVector::new([f64::NAN, 1.0, 0.0, 0.0, 0.0]).is_err());
        let s = RatioVector::softmax(&[1000.0, 0.0, -3.0, 2.0, 1.0]);
        assert!((s.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn allocation_sums_and_stays_close(raw in proptest::array::uniform5(0.0f64..1.0), count in 1usize..500) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let a = RatioVector::softmax(&raw.map(|v| (v / total).ln()));
            let alloc = allocate(&a, count);
            prop_assert_eq!(alloc.iter().sum::<usize>(), count);
            for (n, q) in alloc.iter().zip(a.as_array()) {
                prop_assert!((*n as f64 - q * count as f64).abs() < 1.0);
            }
        }
    }

    #[test]
    fn one_hot_mixture_comes_from_that_pool() {
        let p = make_diffusion(1.0).unwrap();
        let mut bank = SamplerBank::default();
        let mut rng = crate::seed::stream(0, "t", 0);
        let pools: [Vec<[f64; 2]>; 5] = std::array::from_fn(|j| {
            let id = SamplerId::ALL[j];
            if id == SamplerId::Rad {
                pde::sample_interior(&p.domain, 60, &mut rng)
            } else {
                bank.sample(id, &p, 60, None, &mut rng).unwrap()
            }
        });
        let out = compose_mixture(&RatioVector::one_hot(SamplerId::Sobol), &pools, 50, &mut rng).unwrap();
        assert_eq!(out.len(), 50);
        assert!(out.iter().all(|x| pools[2].contains(x)));
        let mut dedup = out.clone();
        dedup.sort_by(|a, b| a.partial_cmp(b).unwrap());
        dedup.dedup();
        assert_eq!(dedup.len(), 50);
        let short: [Vec<[f64; 2]>; 5] = std::array::from_fn(|j| pools[j][..5].to_vec());
        assert!(matches!(
            compose_mixture(&RatioVector::uniform(), &short, 50, &mut rng),
            Err(SamplerError::InsufficientPool { .. })
        ));
    }

    #[test]
    fn streams_continue_unless_restarted() {
        let p = make_diffusion(1.0).unwrap();
        let mut rng = crate::seed::stream(0, "t", 0);
        let mut bank = SamplerBank::default();
        let a = bank.sample(SamplerId::Halton, &p, 4, None, &mut rng).unwrap();
        let b = bank.sample(SamplerId::Halton, &p, 4, None, &mut rng).unwrap();
        let ab = SamplerBank::default().sample(SamplerId::Halton, &p, 8, None, &mut rng).unwrap();
        assert_eq!([a, b.clone()].concat(), ab);
        let mut restart = SamplerBank::new(RadConfig::default(), true);
        let c = restart.sample(SamplerId::Halton, &p, 4, None, &mut rng).unwrap();
        assert_eq!(restart.sample(SamplerId::Halton, &p, 4, None, &mut rng).unwrap(), c);
        assert_eq!(bank.sample(SamplerId::Rad, &p, 4, None, &mut rng), Err(SamplerError::MissingModel));
    }

    #[test]
    fn grid_is_near_square_and_interior() {
        let g = grid(50);
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], [0.5 / 8.0, 0.5 / 8.0]);
        assert_eq!(g[8], [0.5 / 8.0, 1.5 / 8.0]);
        assert_eq!(grid(49).last().unwrap(), &[6.5 / 7.0, 6.5 / 7.0]);
    }

    #[test]
    fn residual_summary_is_a_mean() {
        let p = make_diffusion(1.0).unwrap();
        let spec = MlpSpec::dense(2, &[4], 1, Activation::Tanh, Activation::Linear);
        let params = init_params(&spec, 2);
        let pts = vec![[0.1, 0.2], [-0.3, 0.7], [0.5, 0.5]];
        let once = residual_summary(&p, &spec, &params, &pts).unwrap();
        let twice = residual_summary(&p, &spec, &params, &[pts.clone(), pts].concat()).unwrap();
        assert!((once - twice).abs() <= 1e-15 * once);
    }

    #[test]
    fn residual_summary_on_a_linear_net_is_hand_computable() {
        // u = a x + b t + c with linear activations: u_t = b, u_xx = 0, so
        // f = b − (π² − 1) e^{−t} sin(πx) for z = 1.
        let p = make_diffusion(1.0).unwrap();
        let spec = MlpSpec::new(vec![2, 1], vec![Activation::Linear]).unwrap();
        let params = vec![0.7, -1.3, 0.25];
        let (x, t) = (0.3, 0.4);
        let f = -1.3 - (std::f64::consts::PI.powi(2) - 1.0) * (-t as f64).exp() * (std::f64::consts::PI * x).sin();
        let got = residual_summary(&p, &spec, &params, &[[x, t]]).unwrap();
        assert!((got - f * f).abs() < 1e-12 * f * f);
    }
}
