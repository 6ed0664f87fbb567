//! Microbenchmarks for the operator kernels: mode maps, Ulam matrices, and
//! the Gibbs backward recursion.

use coblab_core::fiberspace::{FiberFunction, FourierFn, UlamFn};
use coblab_core::symbolic::gibbs::gibbs;
use coblab_core::symbolic::lattice::SftLattice;
use coblab_core::transfer::{ulam_matrix, BranchMap, TransferOperator};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use std::hint::black_box;

fn fourier_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("fourier_apply");
    for cutoff in [64usize, 256, 1024] {
        let op = TransferOperator::fourier_linear(2, 0.0).unwrap();
        let modes = vec![Complex64::new(0.3, 0.1); 2 * cutoff + 1];
        let phi = FiberFunction::Fourier(FourierFn::from_modes(modes));
        group.bench_with_input(BenchmarkId::from_parameter(cutoff), &phi, |b, phi| {
            b.iter(|| op.apply(black_box(phi)).unwrap())
        });
    }
    group.finish();
}

fn ulam_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("ulam_apply");
    for cells in [256usize, 1024, 2048] {
        let op = TransferOperator::ulam(BranchMap::markov_saw(), cells);
        let phi = FiberFunction::Ulam(UlamFn::project(
            |x| Complex64::new((std::f64::consts::TAU * x).cos(), 0.0),
            cells,
        ));
        group.bench_with_input(BenchmarkId::from_parameter(cells), &phi, |b, phi| {
            b.iter(|| op.apply(black_box(phi)).unwrap())
        });
    }
    group.finish();
}

fn ulam_assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("ulam_matrix");
    group.sample_size(20);
    for cells in [512usize, 2048] {
        group.bench_with_input(BenchmarkId::from_parameter(cells), &cells, |b, &n| {
            b.iter(|| ulam_matrix(&BranchMap::markov_saw(), black_box(n)))
        });
    }
    group.finish();
}

fn gibbs_construction(c: &mut Criterion) {
    let mut group = c.benchmark_group("gibbs");
    group.sample_size(20);
    let lattice = SftLattice::stationary(ndarray::array![[1, 1], [1, 1]], 200, 1.0).unwrap();
    group.bench_function("window_120_margin_48", |b| {
        b.iter(|| {
            gibbs(&lattice, &|_, a, bb| 0.2 * a as f64 - 0.1 * bb as f64, -60, 60, 48).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, fourier_apply, ulam_apply, ulam_assembly, gibbs_construction);
criterion_main!(benches);
