use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use macdt_core::gp::{GpState, Kernel, RewardField};
use macdt_core::graph::{build_grid, CoverageModel};
use macdt_core::oracle::greedy_oracle;
use macdt_core::policy::{OracleKind, PolicyConfig, PolicyKind};
use macdt_core::sim::{simulate, Environment, GpModelConfig};

fn kernel() -> Kernel {
    Kernel::SquaredExponential {
        length_scale: 0.5,
        signal_variance: 1.0,
    }
}

fn posterior_update(c: &mut Criterion) {
    let g = build_grid(8, 8).unwrap();
    let prior = GpState::new(&kernel(), &g, 0.0, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let batch: Vec<(usize, f64)> = (0..40)
        .map(|_| (rng.random_range(0..64), rng.random_range(-1.0..1.0)))
        .collect();
    c.bench_function("posterior_update_8x8_40obs", |b| {
        b.iter_batched(
            || prior.clone(),
            |gp| gp.posterior_update(&batch).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn oracle(c: &mut Criterion) {
    let g = build_grid(8, 8).unwrap();
    let cov = CoverageModel::for_graph(&g, vec![1, 1, 1]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
    c.bench_function("greedy_oracle_8x8_n3", |b| {
        b.iter(|| greedy_oracle(&w, &g, &cov).unwrap())
    });
}

fn full_run(c: &mut Criterion) {
    let g = build_grid(8, 8).unwrap();
    let cov = CoverageModel::for_graph(&g, vec![1, 1, 1]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let values: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
    let env = Environment {
        graph: g,
        cov,
        reward: RewardField::new(values).unwrap(),
        noise_var: 0.1,
        safety_noise_var: 0.0,
        horizon: 100,
        seed: 5,
        init_positions: vec![0, 1, 2],
        safe_seed: vec![],
    };
    let gp_cfg = GpModelConfig {
        kernel: kernel(),
        prior_mean: 0.0,
        safety_kernel: Kernel::Diagonal { signal_variance: 1.0 },
        safety_prior_mean: 0.0,
    };
    let policy = PolicyConfig {
        kind: PolicyKind::MacDt,
        delta: 0.1,
        alpha: 1.0 - (-1.0f64).exp(),
        oracle: OracleKind::Greedy,
        beta_override: None,
    };
    c.bench_function("simulate_8x8_n3_t100", |b| {
        b.iter(|| simulate(&env, &gp_cfg, &policy).unwrap())
    });
}

criterion_group!(benches, posterior_update, oracle, full_run);
criterion_main!(benches);
