//! Hot-path benchmarks: weights log-determinant, Moran permutations, Durbin
//! likelihood maximization, and Monte Carlo impact inference. Sizes bracket
//! the production scale (77 areas) from both sides.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use geodemand_core::econometrics::morans_i;
use geodemand_core::impacts::{impact_inference, impacts_exact};
use geodemand_core::rng::stream;
use geodemand_core::sdm::fit_sdm_matrices;
use geodemand_core::simulate::{lattice_adjacency, simulate_sdm, standard_normal_matrix};
use geodemand_core::weights::{build_weights, SpatialWeights};
use nalgebra::{DMatrix, DVector};

struct Scene {
    w: SpatialWeights,
    x: DMatrix<f64>,
    y: DVector<f64>,
    names: Vec<String>,
}

fn scene(rows: usize, cols: usize) -> Scene {
    let n = rows * cols;
    let w = build_weights(&lattice_adjacency(rows, cols)).unwrap();
    let mut rng = stream(1, n as u64);
    let x = standard_normal_matrix(n, 3, &mut rng);
    let delta = [1.0, 0.8, -0.5, 0.3, -0.2];
    let y = simulate_sdm(&w, &x, &[0], &delta, 0.4, 0.5, &mut rng).unwrap();
    Scene {
        w,
        x,
        y,
        names: ["x1", "x2", "x3"].map(str::to_owned).to_vec(),
    }
}

fn bench_log_det(c: &mut Criterion) {
    let mut group = c.benchmark_group("log_det");
    for (rows, cols) in [(7, 11), (20, 20)] {
        let s = scene(rows, cols);
        group.bench_with_input(BenchmarkId::from_parameter(rows * cols), &s, |b, s| {
            b.iter(|| {
                let mut acc = 0.0;
                for t in 0..50 {
                    let rho = -0.4 + 0.02 * t as f64;
                    acc += s.w.log_det(black_box(rho)).unwrap();
                }
                acc
            })
        });
    }
    group.finish();
}

fn bench_moran(c: &mut Criterion) {
    let mut group = c.benchmark_group("moran_999_perms");
    for (rows, cols) in [(7, 11), (20, 20)] {
        let s = scene(rows, cols);
        group.bench_with_input(BenchmarkId::from_parameter(rows * cols), &s, |b, s| {
            b.iter(|| morans_i(black_box(&s.y), &s.w, 999, 7).unwrap())
        });
    }
    group.finish();
}

fn bench_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_sdm");
    group.sample_size(20);
    for (rows, cols) in [(7, 11), (20, 20)] {
        let s = scene(rows, cols);
        group.bench_with_input(BenchmarkId::from_parameter(rows * cols), &s, |b, s| {
            b.iter(|| fit_sdm_matrices(black_box(&s.y), &s.x, &s.names, &[0], &s.w).unwrap())
        });
    }
    group.finish();
}

fn bench_impacts(c: &mut Criterion) {
    let s = scene(7, 11);
    let fit = fit_sdm_matrices(&s.y, &s.x, &s.names, &[0], &s.w).unwrap();
    c.bench_function("impacts_exact_77", |b| {
        b.iter(|| impacts_exact(black_box(&fit), &s.w).unwrap())
    });
    let mut group = c.benchmark_group("impact_inference_mc");
    group.sample_size(10);
    group.bench_function("500_draws_77", |b| {
        b.iter(|| impact_inference(black_box(&fit), &s.w, 500, 9).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_log_det, bench_moran, bench_fit, bench_impacts);
criterion_main!(benches);
