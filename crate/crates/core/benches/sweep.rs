//! Benchmarks the sweep machinery: the data-parallel path against the
//! sequential fallback on the same plan, plus single-run iteration cost.
//!
//! Run with `cargo bench`. Without the default `parallel` feature only the
//! sequential path is measured.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use tssqp::harness::{sweep, sweep_sequential, ExperimentPlan, Variant};
use tssqp::{find_problem, GradientOracle, NoiseSpec, SolverConfig};

fn bench_plan() -> ExperimentPlan {
    ExperimentPlan {
        problems: vec!["P1".into(), "P2".into(), "Q1".into(), "R1".into()],
        noise_levels: vec![1e-3, 1e-2],
        beta_scales: vec![0.1],
        seeds: (1..=4).collect(),
        budget: 200,
        variants: vec![Variant::ItsqpExact, Variant::ItsqpIterative],
        base: SolverConfig::default(),
        log_every: 50,
    }
}

fn sweep_benches(c: &mut Criterion) {
    let plan = bench_plan();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(sweep_sequential(black_box(&plan)).unwrap()))
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(sweep(black_box(&plan)).unwrap()))
    });
    group.finish();
}

fn single_run_bench(c: &mut Criterion) {
    let problem = find_problem("Q1").unwrap();
    let config = SolverConfig {
        iterations: 200,
        ..SolverConfig::default()
    };
    c.bench_function("run/Q1-200-iters", |b| {
        b.iter(|| {
            let mut oracle = GradientOracle::new(problem.clone(), NoiseSpec::new(1e-3, 7));
            black_box(tssqp::run(&problem, &mut oracle, &config))
        })
    });
}

criterion_group!(benches, sweep_benches, single_run_bench);
criterion_main!(benches);
