use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mlbpf::{build_bigdata_model, loglik_diag, loglik_full, run_filter, BeamSolver, BeamSpec, LevelSchedule};
use mlbpf_bench::observation_fixture;

fn likelihood_tiers(c: &mut Criterion) {
    let mut group = c.benchmark_group("loglik");
    for p in [25usize, 100, 500] {
        let (cov, y) = observation_fixture(p);
        group.bench_with_input(BenchmarkId::new("full", p), &p, |b, _| {
            b.iter(|| loglik_full(black_box(0.3), &y, &cov))
        });
        group.bench_with_input(BenchmarkId::new("diag", p), &p, |b, _| {
            b.iter(|| loglik_diag(black_box(0.3), &y, &cov))
        });
    }
    group.finish();
}

fn beam_meshes(c: &mut Criterion) {
    let spec = Arc::new(BeamSpec::standard());
    let mut group = c.benchmark_group("beam_solve");
    for theta in [60usize, 115, 500, 4000] {
        let solver = BeamSolver::new(spec.clone(), theta).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(theta), &theta, |b, _| {
            b.iter(|| solver.sensor_values(black_box(1.2)))
        });
    }
    group.finish();
}

fn filter_runs(c: &mut Criterion) {
    let (model, _) = build_bigdata_model(100, 0.1, 10, 3).unwrap();
    let bpf = model.with_levels(1).unwrap();
    let mut group = c.benchmark_group("filter_10_steps_p100");
    group.sample_size(10);
    group.bench_function("bpf_250", |b| {
        b.iter(|| run_filter(&bpf, LevelSchedule::single(250).unwrap(), 10, 1).unwrap())
    });
    group.bench_function("mlbpf_4000_50", |b| {
        b.iter(|| run_filter(&model, LevelSchedule::from_sizes(vec![4000, 50]).unwrap(), 10, 1).unwrap())
    });
    group.finish();
}

criterion_group!(benches, likelihood_tiers, beam_meshes, filter_runs);
criterion_main!(benches);
