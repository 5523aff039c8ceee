//! Criterion benchmarks for the hot paths: lifted-form jets, integral
//! tables, and the end-to-end pipelines at small T.

use criterion::{black_box, BenchmarkId, Criterion};
use lfun_core::engine::{self, Grouping, PipelineParams};
use lfun_core::forms::{lift_jet_n, CuspFormSpec};
use lfun_core::geometry::{a_mat, n_mat};

fn delta() -> CuspFormSpec {
    CuspFormSpec::delta(200)
}

pub fn lift_jets(c: &mut Criterion) {
    let f = delta();
    let x = a_mat(-(1000f64).ln()) * n_mat(0.25);
    let mut g = c.benchmark_group("lift_jet_n");
    for order in [16usize, 64] {
        g.bench_with_input(BenchmarkId::from_parameter(order), &order, |b, &n| {
            b.iter(|| lift_jet_n(&f, black_box(&x), 0.1, n, 0.1).unwrap())
        });
    }
    g.finish();
}

pub fn tables(c: &mut Criterion) {
    let f = delta();
    let p = PipelineParams::default();
    let v = a_mat(-(4096f64).ln()) * n_mat(0.3);
    let mut g = c.benchmark_group("batch_i");
    g.sample_size(10);
    for (d, l) in [(0usize, 0usize), (2, 6), (4, 10)] {
        g.bench_with_input(BenchmarkId::new("d_l", format!("{d}_{l}")), &(d, l), |b, &(d, l)| {
            b.iter(|| engine::batch_i(&f, black_box(&v), d, l, 2.0, 4096.0, &p).unwrap())
        });
    }
    g.finish();
}

pub fn pipelines(c: &mut Criterion) {
    let f = delta();
    let auto = PipelineParams::default();
    let always = PipelineParams { grouping: Grouping::Always, ..auto };
    let mut g = c.benchmark_group("pipelines");
    g.sample_size(10);
    g.bench_function("fourier_fast/256", |b| b.iter(|| engine::fourier_fast(&f, black_box(256), &auto).unwrap()));
    g.bench_function("fourier_direct/256", |b| b.iter(|| engine::fourier_direct(&f, black_box(256), &auto).unwrap()));
    g.bench_function("lvalue_fast/16", |b| b.iter(|| engine::lvalue_fast(&f, black_box(16.0), &auto).unwrap()));
    g.bench_function("lvalue_fast_always/16", |b| b.iter(|| engine::lvalue_fast(&f, black_box(16.0), &always).unwrap()));
    g.bench_function("lvalue_direct/16", |b| b.iter(|| engine::lvalue_direct(&f, black_box(16.0), &auto).unwrap()));
    g.bench_function("fourier_fast_counts/65536", |b| {
        b.iter(|| engine::fourier_fast_counts(&f, black_box(65536), &auto).unwrap())
    });
    g.finish();
}
