use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use cqed_mermin::experiment::{run_mermin, MerminSettings, Mode};
use cqed_mermin::qubits::ThreeQubitState;
use cqed_mermin::spectroscopy::{transmission_spectrum, DetuningGrid, DispersiveParams};
use cqed_mermin::Execution;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn spectrum_sweep(c: &mut Criterion) {
    let p = DispersiveParams::reference();
    let state = ThreeQubitState::ghz();
    let mut group = c.benchmark_group("spectrum_sweep");
    for step in [1.0, 0.1] {
        let grid = DetuningGrid::new(-700.0, 700.0, step).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, grid.len()), &grid, |b, grid| {
                b.iter(|| transmission_spectrum(black_box(&state), grid, &p, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn mermin_run(c: &mut Criterion) {
    let p = DispersiveParams::reference();
    let grid = DetuningGrid::default();
    let state = ThreeQubitState::ghz();
    let settings = MerminSettings::maximal();
    let mut group = c.benchmark_group("mermin");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| run_mermin(black_box(&state), &settings, Mode::Both, &p, &grid, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, spectrum_sweep, mermin_run);
criterion_main!(benches);
