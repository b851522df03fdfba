use std::f64::consts::PI;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use detglue_core::asymptotic_fit::{log_grid, sample_family, LogDetFamily};
use detglue_core::gluing::{glue, verify_eq41};
use detglue_core::par::{self, Mode};
use detglue_core::spectral_models::{circle_eigenvalues, ModelGeometry};
use detglue_core::zeta_engine::log_det;
use detglue_core::Complex64;

const MODES: [(&str, Mode); 2] = [("seq", Mode::Sequential), ("par", Mode::Parallel)];

fn bench_log_det(c: &mut Criterion) {
    // long circle: many terms before the tail series takes over
    let seq = circle_eigenvalues(60.0, 1.0).unwrap();
    let mut g = c.benchmark_group("log_det_long_circle");
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            par::set_mode(mode);
            b.iter(|| log_det(&seq, Complex64::new(0.0, 0.0)).unwrap())
        });
    }
    g.finish();
}

fn bench_torus(c: &mut Criterion) {
    let geom = ModelGeometry::TorusCut {
        l1: 2.0,
        l2: 2.0 * PI,
        mass: 1.0,
    };
    let mut g = c.benchmark_group("torus_glue");
    g.sample_size(20);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            par::set_mode(mode);
            b.iter(|| glue(&geom, 512, 0.0).unwrap())
        });
    }
    g.finish();
    let mut g = c.benchmark_group("torus_eq41");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            par::set_mode(mode);
            b.iter(|| verify_eq41(&geom, 2, &[0.5, 1.0, 2.0, 5.0], 256).unwrap())
        });
    }
    g.finish();
}

fn bench_family(c: &mut Criterion) {
    let fam = LogDetFamily::geometry(&ModelGeometry::Circle {
        length: 2.0,
        mass: 1.0,
    })
    .unwrap();
    let grid = log_grid(1e2, 1e4, 40);
    let mut g = c.benchmark_group("sample_family");
    g.sample_size(20);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            par::set_mode(mode);
            b.iter(|| sample_family(&fam, &grid).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_log_det, bench_torus, bench_family);
criterion_main!(benches);
