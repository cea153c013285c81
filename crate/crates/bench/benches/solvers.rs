use criterion::{criterion_group, criterion_main, Criterion};
use halfline::fdoracle::{assemble_1d, negative_eigs};
use halfline::propagator::{propagate, propagate_transfer};
use halfline::spectrum::eigenvalue_count;
use halfline::{find_spectrum, SearchOptions, Tolerances};
use halfline_bench::{box_well, coupled_gaussian};
use std::hint::black_box;

fn propagation(c: &mut Criterion) {
    let tol = Tolerances::default();
    let boxed = box_well();
    let smooth = coupled_gaussian();
    c.bench_function("propagate/box_rk", |b| b.iter(|| propagate(black_box(&boxed), 3.0, &tol).unwrap()));
    c.bench_function("propagate/box_transfer", |b| {
        b.iter(|| propagate_transfer(black_box(&boxed), 3.0, &tol).unwrap())
    });
    c.bench_function("propagate/gaussian_n3", |b| b.iter(|| propagate(black_box(&smooth), 1.0, &tol).unwrap()));
    c.bench_function("count/gaussian_n3", |b| {
        b.iter(|| eigenvalue_count(black_box(&smooth), 0.1, &tol).unwrap())
    });
}

fn spectra(c: &mut Criterion) {
    let opts = SearchOptions::default();
    let boxed = box_well();
    let smooth = coupled_gaussian();
    let mut g = c.benchmark_group("find_spectrum");
    g.sample_size(10);
    g.bench_function("box", |b| b.iter(|| find_spectrum(black_box(&boxed), &opts).unwrap()));
    g.bench_function("gaussian_n3", |b| b.iter(|| find_spectrum(black_box(&smooth), &opts).unwrap()));
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let smooth = coupled_gaussian();
    let op = assemble_1d(&smooth, 0.01, 20.0).unwrap();
    let mut g = c.benchmark_group("fdoracle");
    g.sample_size(10);
    g.bench_function("assemble_n3", |b| b.iter(|| assemble_1d(black_box(&smooth), 0.01, 20.0).unwrap()));
    g.bench_function("negative_eigs_n3", |b| b.iter(|| negative_eigs(black_box(&op), usize::MAX, 0.0)));
    g.finish();
}

criterion_group!(benches, propagation, spectra, oracle);
criterion_main!(benches);
