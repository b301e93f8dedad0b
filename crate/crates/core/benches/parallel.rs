//! Sequential vs data-parallel execution of the batch kernels.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use harvest::lyapunov::{label_batch, ClosedLoop, PendulumParams, RoaGrid, State, StateBox};
use harvest::nn::{init_params, LyapunovNet, MlpSpec};
use harvest::par::Exec;
use harvest::pde::{make_problem, residuals, sample_interior, PdeEnv};
use harvest::seed;
use rand::Rng;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn roa_grid(c: &mut Criterion) {
    let system = ClosedLoop::lqr(PendulumParams::default()).unwrap();
    let bounds = StateBox::default();
    let mut group = c.benchmark_group("roa_grid_41x41_h500");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| RoaGrid::compute(black_box(&system), &bounds, 41, 500, exec))
        });
    }
    group.finish();
}

fn labels(c: &mut Criterion) {
    let system = ClosedLoop::lqr(PendulumParams::default()).unwrap();
    let net = LyapunovNet::init(0);
    let bounds = StateBox::default();
    let mut rng = seed::stream(0, "bench/labels", 0);
    let xs: Vec<State> = (0..500)
        .map(|_| [rng.random_range(-bounds.phi..bounds.phi), rng.random_range(-bounds.omega..bounds.omega)])
        .collect();
    let mut group = c.benchmark_group("label_batch_500_h100");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| label_batch(&system, &net, black_box(&xs), 0.5, 100, exec))
        });
    }
    group.finish();
}

fn rad_pool_residuals(c: &mut Criterion) {
    let problem = make_problem(PdeEnv::Diffusion, 1.0).unwrap();
    let spec = MlpSpec::pinn();
    let params = init_params(&spec, 0);
    let mut rng = seed::stream(0, "bench/pool", 0);
    let pool = sample_interior(&problem.domain, 10_000, &mut rng);
    let mut group = c.benchmark_group("pde_residuals_10k");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| residuals(&problem, &spec, &params, black_box(&pool), exec))
        });
    }
    group.finish();
}

criterion_group!(benches, roa_grid, labels, rad_pool_residuals);
criterion_main!(benches);
