use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use specsamp::perf::{simulate_sequence_times, AcceptanceStats, CostModel, Simulation};
use specsamp::verify::{identity_suite, losslessness_suite};
use specsamp::Exec;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn losslessness(c: &mut Criterion) {
    let mut group = c.benchmark_group("losslessness_suite_24");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| losslessness_suite(black_box(7), 24, exec).unwrap())
        });
    }
    group.finish();
}

fn identity(c: &mut Criterion) {
    let mut group = c.benchmark_group("identity_suite_10k");
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| identity_suite(black_box(7), 10_000, 64, exec).unwrap())
        });
    }
    group.finish();
}

fn sequence_time_simulation(c: &mut Criterion) {
    let cost = CostModel::published();
    let stats = AcceptanceStats::Rate(0.7);
    let mut group = c.benchmark_group("simulate_10k_sequences_k4");
    for (name, exec) in POLICIES {
        let sim = Simulation { exec, ..Simulation::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &sim, |b, sim| {
            b.iter(|| simulate_sequence_times(&cost, 4, &stats, black_box(sim)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, losslessness, identity, sequence_time_simulation);
criterion_main!(benches);
