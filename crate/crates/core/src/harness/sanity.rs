//! Quick self-checks: autodiff against finite differences, the
//! quasi-random sequences against independent constructions, and both
//! agents on the calibration bandit.

use rand::Rng;

use crate::autodiff::eval_hyperdual;
use crate::nn::{init_params, Activation, MlpSpec};
use crate::pde::{make_diffusion, pinn_loss, pinn_loss_value, sample_boundary, sample_interior, CollocationSet, MlpModel};
use crate::rl::{Agent, AgentConfig, AgentKind, QuadraticBandit};
use crate::samplers::{halton_point, sobol_point};
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-2)
}

/// Random tanh MLP `2 → … → 1` with one to three hidden layers.
pub fn random_tanh_net<R: Rng + ?Sized>(rng: &mut R) -> MlpSpec {
    let depth = rng.random_range(1..=3);
    let mut widths = vec![2];
    widths.extend((0..depth).map(|_| rng.random_range(2..=8)));
    widths.push(1);
    let mut acts = vec![Activation::Tanh; depth];
    acts.push(Activation::Linear);
    MlpSpec::new(widths, acts).expect("valid widths")
}

/// Worst relative error of hyper-dual first and second input derivatives
/// against central differences, over `nets` random networks.
pub fn input_derivative_error(nets: usize, seed: u64) -> f64 {
    let mut rng = seed::stream(seed, "sanity/autodiff", 0);
    let mut worst: f64 = 0.0;
    for n in 0..nets {
        let spec = random_tanh_net(&mut rng);
        let params = init_params(&spec, seed::child_seed(seed, "sanity/net", n as u64));
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let f = |p: [f64; 2]| spec.forward(&params, &p)[0];
        for a in 0..2 {
            for b in 0..2 {
                let (mut ea, mut eb) = ([0.0; 2], [0.0; 2]);
                ea[a] = 1.0;
                eb[b] = 1.0;
                let hd = eval_hyperdual(&spec, &params, &x, &ea, &eb).expect("dimensions match")[0];
                let h = 1e-5;
                let shift = |p: [f64; 2], e: [f64; 2], s: f64| [p[0] + s * e[0], p[1] + s * e[1]];
                let d1 = (f(shift(x, ea, h)) - f(shift(x, ea, -h))) / (2.0 * h);
                let h2 = 1e-4;
                let d12 = (f(shift(shift(x, ea, h2), eb, h2)) - f(shift(shift(x, ea, h2), eb, -h2))
                    - f(shift(shift(x, ea, -h2), eb, h2))
                    + f(shift(shift(x, ea, -h2), eb, -h2)))
                    / (4.0 * h2 * h2);
                worst = worst.max(rel_err(hd.d1, d1)).max(rel_err(hd.d12, d12));
            }
        }
    }
    worst
}

/// Worst relative error of the PINN-loss parameter gradient against
/// central differences at `coords` random coordinates.
pub fn pinn_gradient_error(coords: usize, seed: u64) -> f64 {
    let mut rng = seed::stream(seed, "sanity/pinn", 0);
    let problem = make_diffusion(1.0 + rng.random::<f64>()).expect("valid z");
    let spec = MlpSpec::pinn();
    let mut params = init_params(&spec, seed);
    let colloc = CollocationSet {
        interior: sample_interior(&problem.domain, 20, &mut rng),
        boundary: sample_boundary(&problem, 12, &mut rng),
    };
    let grad = pinn_loss(&problem, &spec, &params, &colloc).expect("nonempty set").grad.expect("gradient");
    let mut worst: f64 = 0.0;
    for _ in 0..coords {
        let k = rng.random_range(0..params.len());
        let base = params[k];
        let h = 1e-6;
        let mut loss = |v: f64| {
            params[k] = v;
            let model = MlpModel { spec: &spec, params: &params };
            pinn_loss_value(&problem, &model, &colloc).expect("nonempty set").total
        };
        let fd = (loss(base + h) - loss(base - h)) / (2.0 * h);
        params[k] = base;
        worst = worst.max(rel_err(grad[k], fd));
    }
    worst
}

pub fn autodiff_suite(nets: usize, coords: usize, seed: u64) -> CheckResult {
    let input = input_derivative_error(nets, seed);
    let param = pinn_gradient_error(coords, seed);
    CheckResult::new(
        "autodiff",
        input < 1e-4 && param < 1e-4,
        format!("{nets} nets: input derivatives rel err {input:.2e}; {coords} loss-gradient coordinates rel err {param:.2e}"),
    )
}

/// Radical inverse from the base-`b` digits of `i`, least significant
/// first, as an exact integer ratio.
fn digit_reversal(i: u64, base: u64) -> f64 {
    let mut digits = Vec::new();
    let mut n = i;
    while n > 0 {
        digits.push(n % base);
        n /= base;
    }
    let numer = digits.iter().fold(0u64, |acc, d| acc * base + d);
    numer as f64 / base.pow(digits.len() as u32) as f64
}

/// Sobol points by the Antonov–Saleev recurrence: each point flips the
/// direction number indexed by the lowest zero bit of the previous index.
fn sobol_recurrence(n: usize) -> Vec<[f64; 2]> {
    const BITS: usize = 32;
    // Dimension 2 uses the polynomial x + 1: m_k = 2 m_{k−1} xor m_{k−1}.
    let mut m = vec![1u64; BITS];
    for k in 1..BITS {
        m[k] = (m[k - 1] << 1) ^ m[k - 1];
    }
    let v1: Vec<u64> = (0..BITS).map(|k| 1u64 << (BITS - 1 - k)).collect();
    let v2: Vec<u64> = (0..BITS).map(|k| m[k] << (BITS - 1 - k)).collect();
    let scale = (1u64 << BITS) as f64;
    let (mut x1, mut x2) = (0u64, 0u64);
    let mut out = vec![[0.0, 0.0]];
    for i in 1..n {
        let c = (!(i as u64 - 1)).trailing_zeros() as usize;
        x1 ^= v1[c];
        x2 ^= v2[c];
        out.push([x1 as f64 / scale, x2 as f64 / scale]);
    }
    out
}

/// Count of the first `n` Halton and Sobol points (from index 1) that
/// differ from the independent constructions.
pub fn sequence_mismatches(n: usize) -> usize {
    let sobol = sobol_recurrence(n + 1);
    (1..=n)
        .filter(|&i| {
            let h = halton_point(i as u64);
            h != [digit_reversal(i as u64, 2), digit_reversal(i as u64, 3)] || sobol_point(i as u64) != sobol[i]
        })
        .count()
}

pub fn sequence_suite(n: usize) -> CheckResult {
    let bad = sequence_mismatches(n);
    CheckResult::new("sequences", bad == 0, format!("{bad} of the first {n} Halton/Sobol points differ from the oracles"))
}

/// Deterministic bandit action of each agent after `updates` updates.
pub fn bandit_actions(updates: usize, seed: u64) -> Vec<(AgentKind, f64)> {
    [AgentKind::Td3, AgentKind::Sac]
        .into_iter()
        .map(|kind| {
            let mut rng = seed::stream(seed, "sanity/bandit", kind as u64);
            let mut agent = Agent::new(kind, 1, 1, AgentConfig::default(), &mut rng);
            let a = QuadraticBandit::default().train(&mut agent, updates, seed).expect("finite bandit losses");
            (kind, a)
        })
        .collect()
}

pub fn bandit_suite(updates: usize, seed: u64) -> CheckResult {
    let optimum = QuadraticBandit::default().optimum;
    let actions = bandit_actions(updates, seed);
    let passed = actions.iter().all(|(_, a)| (a - optimum).abs() < 0.05);
    let detail = actions.iter().map(|(k, a)| format!("{k:?} a = {a:.4}")).collect::<Vec<_>>().join(", ");
    CheckResult::new("bandit", passed, format!("{detail} (optimum {optimum}, {updates} updates)"))
}

/// The quick suite behind the `sanity` command.
pub fn run_sanity() -> Vec<CheckResult> {
    vec![autodiff_suite(20, 20, 0), sequence_suite(64), bandit_suite(2_000, 0)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracles_agree_with_known_points() {
        assert_eq!(digit_reversal(6, 3), 2.0 / 9.0);
        let s = sobol_recurrence(4);
        assert_eq!(s[1], [0.5, 0.5]);
        assert_eq!(s[2], [0.75, 0.25]);
        assert_eq!(s[3], [0.25, 0.75]);
        assert_eq!(sequence_mismatches(64), 0);
    }

    #[test]
    fn autodiff_checks_pass() {
        assert!(input_derivative_error(5, 1) < 1e-4);
        assert!(pinn_gradient_error(5, 1) < 1e-4);
    }
}
