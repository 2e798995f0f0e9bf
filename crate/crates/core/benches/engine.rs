use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use dsdistimator::engine::run_sequential;
use dsdistimator::histogram::run_trials;
use dsdistimator::BellDiagonalState;

#[cfg(feature = "parallel")]
use dsdistimator::engine::run_parallel;

fn bench_run(c: &mut Criterion) {
    let state = BellDiagonalState::new([0.62, 0.15, 0.05, 0.18]).unwrap();
    let mut group = c.benchmark_group("run");
    for n in [10_000u64, 100_000, 1_000_000] {
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| run_sequential(black_box(&state), n, 7).unwrap())
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| run_parallel(black_box(&state), n, 7).unwrap())
        });
    }
    group.finish();
}

fn bench_trials(c: &mut Criterion) {
    let state = BellDiagonalState::new([0.62, 0.15, 0.05, 0.18]).unwrap();
    let mut group = c.benchmark_group("histogram_trials");
    group.sample_size(10);
    group.bench_function("100x10k", |b| {
        b.iter(|| run_trials(black_box(&state), 10_000, 100, 3, [0.01; 3]).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_run, bench_trials);
criterion_main!(benches);
