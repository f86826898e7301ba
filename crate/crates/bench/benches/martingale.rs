use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mtrace_bench::{dyadic, functions};
use mtrace_core::martingale::{averaged_kernel, conditional_expectation, maximal_function, sandwich_identity_check};
use mtrace_core::Kernel;

fn bench_conditional_expectation(c: &mut Criterion) {
    let filt = dyadic(12);
    let f = functions(&filt, 1).remove(0);
    let mut group = c.benchmark_group("conditional_expectation");
    for n in [2usize, 6, 12] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| conditional_expectation(&f, &filt, n).unwrap())
        });
    }
    group.bench_function("maximal_function", |b| b.iter(|| maximal_function(&f, &filt).unwrap()));
    group.finish();
}

fn bench_averaged_kernel(c: &mut Criterion) {
    let filt = dyadic(9);
    let kernel = Kernel::exp_abs(1.0).unwrap();
    let mut group = c.benchmark_group("averaged_kernel");
    for n in [3usize, 6, 9] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| averaged_kernel(&kernel, &filt, n).unwrap())
        });
    }
    group.finish();
}

fn bench_sandwich(c: &mut Criterion) {
    let filt = dyadic(7);
    let mut group = c.benchmark_group("sandwich");
    group.sample_size(10);
    group.bench_function("brownian_min L=7 n=4", |b| {
        b.iter(|| sandwich_identity_check(&Kernel::BrownianMin, &filt, 4, 1e-10).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_conditional_expectation, bench_averaged_kernel, bench_sandwich);
criterion_main!(benches);
