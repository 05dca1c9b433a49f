//! Throughput of the elementary moves of each model: one discrete pair move,
//! one continuous pair move, one binary trade, one batch of interaction
//! events, and one implicit diffusion step.

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use std::hint::black_box;

use cofrag::chain_dc::{dc_step, deterministic_route};
use cofrag::chain_dd::{dd_step, DiscretePoint};
use cofrag::fokker_planck::{fp_step, stationary_solution, DensityField, FpConfig};
use cofrag::kinetic::{dsmc_run, exchange_pair, ExchangeParams, NoiseSpec, WealthPopulation};
use cofrag::rng::seeded_stream;
use cofrag::simplex::{sample_uniform_simplex, SimplexPoint};

fn bench_dd_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("dd_step");
    for &(agents, coins) in &[(3usize, 100u64), (10, 1000), (100, 10_000)] {
        let mut rng = seeded_stream(11, 0);
        let mut counts = vec![coins / agents as u64; agents];
        counts[0] += coins % agents as u64;
        let mut state = DiscretePoint::new(counts).unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{agents}x{coins}")),
            &(),
            |b, _| b.iter(|| black_box(dd_step(&mut state, &mut rng))),
        );
    }
    group.finish();
}

fn bench_dc_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("dc_step");
    for &agents in &[3usize, 10, 100] {
        let mut rng = seeded_stream(12, 0);
        let mut state = SimplexPoint::barycenter(agents).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(agents), &(), |b, _| {
            b.iter(|| black_box(dc_step(&mut state, &mut rng)))
        });
    }
    group.finish();
}

fn bench_route(c: &mut Criterion) {
    let mut group = c.benchmark_group("deterministic_route");
    for &agents in &[3usize, 10, 100] {
        let mut rng = seeded_stream(13, 0);
        let source = sample_uniform_simplex(agents, &mut rng).unwrap();
        let target = sample_uniform_simplex(agents, &mut rng).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(agents), &(), |b, _| {
            b.iter(|| deterministic_route(black_box(&source), black_box(&target)).unwrap())
        });
    }
    group.finish();
}

fn bench_exchange_pair(c: &mut Criterion) {
    let mut rng = seeded_stream(14, 0);
    let quiet = ExchangeParams::new(0.3, NoiseSpec::Zero).unwrap();
    let noisy = ExchangeParams::new(0.3, NoiseSpec::TwoPoint { sigma: 0.5 }).unwrap();
    let mut group = c.benchmark_group("exchange_pair");
    group.bench_function("zero_noise", |b| {
        b.iter(|| black_box(exchange_pair(1.25, 0.75, &quiet, &mut rng)))
    });
    group.bench_function("two_point_noise", |b| {
        b.iter(|| black_box(exchange_pair(1.25, 0.75, &noisy, &mut rng)))
    });
    group.finish();
}

fn bench_dsmc_unit_time(c: &mut Criterion) {
    let params = ExchangeParams::new(0.3, NoiseSpec::Zero).unwrap();
    let mut group = c.benchmark_group("dsmc_unit_time");
    group.sample_size(20);
    for &agents in &[1_000usize, 10_000] {
        let mut rng = seeded_stream(15, 0);
        let population = WealthPopulation::iid_exponential(agents, 1.0, &mut rng).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(agents), &(), |b, _| {
            b.iter_batched(
                || (population.clone(), seeded_stream(15, 1)),
                |(pop, mut rng)| dsmc_run(pop, 1.0, &params, &[], 1, &mut rng).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn bench_fp_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("fp_step");
    for &cells in &[256usize, 1024, 4096] {
        let cfg = FpConfig::new(1.0, 1.0, 50.0, cells, 0.01).unwrap();
        let field: DensityField = stationary_solution(&cfg);
        group.bench_with_input(BenchmarkId::from_parameter(cells), &(), |b, _| {
            b.iter(|| fp_step(black_box(&field), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_dd_step,
    bench_dc_step,
    bench_route,
    bench_exchange_pair,
    bench_dsmc_unit_time,
    bench_fp_step
);
criterion_main!(benches);
