use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use greybm::occupation::{count_crossings, crossings_local_time_approx};
use greybm::paths::{generate_gbm, FbmGenerator};
use greybm::regularize::Kernel;
use greybm::specfun::{m_wright_density, mittag_leffler};
use greybm::{EvalConfig, GreyParams, LinearPath, RngStream, TimeGrid};

fn mittag_leffler_bench(c: &mut Criterion) {
    let cfg = EvalConfig::default();
    let mut group = c.benchmark_group("mittag_leffler");
    for x in [-1.0, -4.5, -20.0, -1e4] {
        group.bench_with_input(BenchmarkId::from_parameter(x), &x, |b, &x| {
            b.iter(|| mittag_leffler(0.6, black_box(x), &cfg).unwrap())
        });
    }
    group.finish();
}

fn m_wright_bench(c: &mut Criterion) {
    let cfg = EvalConfig::default();
    let mut group = c.benchmark_group("m_wright");
    for beta in [0.3, 0.6, 0.9] {
        group.bench_with_input(BenchmarkId::from_parameter(beta), &beta, |b, &beta| {
            b.iter(|| m_wright_density(beta, black_box(1.7), &cfg).unwrap())
        });
    }
    group.finish();
}

fn fbm_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("fbm_path");
    for n in [1025usize, 4097, 16385] {
        let grid = TimeGrid::new(1.0, n, 0).unwrap();
        let generator = FbmGenerator::new(0.6, grid).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| generator.sample_values(&mut rng))
        });
    }
    group.finish();
}

fn crossings_bench(c: &mut Criterion) {
    let params = GreyParams::new(1.2, 0.6).unwrap();
    let grid = TimeGrid::with_margin(1.0, 4097, 1.0 / 16.0).unwrap();
    let path = generate_gbm(params, grid, RngStream::new(1, 0)).unwrap();
    let kernel = Kernel::rectangular();
    let base = LinearPath::core(&path);
    c.bench_function("count_crossings/4097", |b| {
        b.iter(|| count_crossings(base, black_box(0.1)))
    });
    c.bench_function("crossings_local_time/4097", |b| {
        b.iter(|| {
            crossings_local_time_approx(&path, &kernel, 1.0 / 64.0, |_| 1.0, (0.0, 1.0)).unwrap()
        })
    });
}

criterion_group!(
    benches,
    mittag_leffler_bench,
    m_wright_bench,
    fbm_bench,
    crossings_bench
);
criterion_main!(benches);
