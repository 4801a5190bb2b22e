use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fet_bench::{default_config, mixed_population};
use fet_core::duel::exact_duel;
use fet_core::markov::build_kernel;
use fet_core::protocol::rng::{lane, round_rng, AGGREGATE_LANE};
use fet_core::protocol::{step_agent_level, step_aggregate_counts, Rule};

fn duel(c: &mut Criterion) {
    let mut g = c.benchmark_group("exact_duel");
    for k in [25u64, 100, 400] {
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| exact_duel(black_box(k), black_box(0.48), black_box(0.52)).unwrap())
        });
    }
    g.finish();
}

fn kernel(c: &mut Criterion) {
    let mut g = c.benchmark_group("build_kernel");
    g.sample_size(10);
    for n in [16u64, 64] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| build_kernel(n, 8).unwrap()));
    }
    g.finish();
}

fn aggregate_step(c: &mut Criterion) {
    let cfg = default_config(1 << 13);
    let mut rng = lane(&round_rng(1, 0, 1), AGGREGATE_LANE);
    c.bench_function("step_aggregate/n=8192", |b| {
        b.iter(|| step_aggregate_counts(black_box(4000), black_box(4100), cfg.n, cfg.ell, 1, &mut rng).unwrap())
    });
}

fn agent_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("step_agent_level");
    g.sample_size(20);
    for n in [1u64 << 10, 1 << 13] {
        let cfg = default_config(n);
        let pop = mixed_population(n, cfg.ell);
        let base = round_rng(1, 0, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &pop, |b, pop| {
            b.iter(|| step_agent_level(pop, cfg.ell, Rule::Fet, &base))
        });
    }
    g.finish();
}

criterion_group!(benches, duel, kernel, aggregate_step, agent_step);
criterion_main!(benches);
