//! Rayon map against the sequential fallback on suite-sized workloads.
//!
//! Build with `--no-default-features` to make both arms sequential.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hglk_core::par;
use hglk_core::spectral::loewner_check;
use hglk_core::suite;

fn cross_path(k: usize) -> f64 {
    let op = suite::rough_operator(101 + k as u64, 64, 16.0).unwrap();
    suite::fracpow_cross_path(&op, 1.0, 200).unwrap().rel_error
}

fn loewner(k: usize) -> f64 {
    let (a1, a2) = suite::loewner_pair(7, k);
    loewner_check(&a1, &a2, 0.5).unwrap().min_gap_eig
}

fn ode(k: usize) -> f64 {
    suite::ode_max_error(&suite::ode_case(7, k), 20_000).unwrap()
}

fn compare(c: &mut Criterion, name: &str, count: usize, work: fn(usize) -> f64) {
    let mut g = c.benchmark_group(name);
    g.sample_size(10);
    g.bench_with_input(BenchmarkId::new("rayon", count), &count, |b, &n| {
        b.iter(|| black_box(par::map_indexed(n, work)))
    });
    g.bench_with_input(BenchmarkId::new("sequential", count), &count, |b, &n| {
        b.iter(|| black_box(par::map_indexed_seq(n, work)))
    });
    g.finish();
}

fn benches(c: &mut Criterion) {
    compare(c, "fracpow_cross_path", 16, cross_path);
    compare(c, "loewner", 64, loewner);
    compare(c, "comparison_ode", 16, ode);
}

criterion_group!(parallel, benches);
criterion_main!(parallel);
