use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gdcycles::dynamics::{fft, power_spectrum_tapered, Taper};
use gdcycles::onedim::orbit;
use gdcycles::transforms::hunt_single;
use gdcycles::{HuntConfig, Objective, OneDimProblem};
use gdcycles_bench::{lifted_fixture, probe_point};
use nalgebra::Complex;
use std::hint::black_box;

const LIFTED_DIMS: &[usize] = &[50, 500, 5000];

fn lifted_grad(c: &mut Criterion) {
    let mut group = c.benchmark_group("lifted_grad");
    for &d in LIFTED_DIMS {
        let lifted = lifted_fixture(4, d);
        let w = probe_point(d);
        let mut out = vec![0.0; d];
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| lifted.grad_into(black_box(&w), &mut out).unwrap())
        });
    }
    group.finish();
}

fn spectrum(c: &mut Criterion) {
    let series: Vec<f64> = (0..1024).map(|t| (t as f64 * 0.37).sin() + (t % 7) as f64).collect();
    c.bench_function("fft_1024", |b| {
        b.iter(|| {
            let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x, 0.0)).collect();
            fft(black_box(&mut buf));
            buf
        })
    });
    c.bench_function("hann_spectrum_1024", |b| {
        b.iter(|| power_spectrum_tapered(black_box(&series), 1024, Taper::Hann).unwrap())
    });
}

fn onedim_map(c: &mut Criterion) {
    let p = OneDimProblem::new(3.0).unwrap();
    c.bench_function("onedim_orbit_10000", |b| b.iter(|| orbit(black_box(40.0), 10_000, &p, 1.99)));
}

fn hunt_trial(c: &mut Criterion) {
    let config = HuntConfig { seed: 3, ..HuntConfig::default() };
    let mut group = c.benchmark_group("hunt");
    group.sample_size(10);
    group.bench_function("single_trial", |b| b.iter(|| hunt_single(&config, black_box(341)).unwrap()));
    group.finish();
}

criterion_group!(benches, lifted_grad, spectrum, onedim_map, hunt_trial);
criterion_main!(benches);
