use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fernn_bench::{cct, nested_formula};
use fernn_core::stl::{robustness, robustness_recurrent};

fn monitor(c: &mut Criterion) {
    let f = nested_formula();
    let mut group = c.benchmark_group("monitor");
    for len in [50, 200, 800] {
        let ds = cct(2, len);
        let tr = &ds.traces[0];
        group.bench_with_input(BenchmarkId::new("recurrent", len), tr, |b, tr| {
            b.iter(|| robustness_recurrent(black_box(&f), tr).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("windowed", len), tr, |b, tr| {
            b.iter(|| robustness(black_box(&f), tr).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, monitor);
criterion_main!(benches);
