use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rho1d::analytic::AnalyticSystem;
use rho1d::density::log_derivative;
use rho1d::eigen::{build_hamiltonian, ground_state};
use rho1d::scf::{default_initial_density, minimize_energy, scf_solve};
use rho1d::ScfParams;

fn solvers(c: &mut Criterion) {
    let s = AnalyticSystem::unit_oscillator();
    let g = s.default_grid(None).unwrap();
    let v = s.potential(&g).unwrap();
    let init = default_initial_density(&v).unwrap();
    let p = ScfParams::default();

    c.bench_function("ground_state/oscillator_4001", |b| {
        let h = build_hamiltonian(&v, &g, s.constants).unwrap();
        b.iter(|| ground_state(black_box(&h)).unwrap())
    });
    c.bench_function("scf_solve/oscillator_4001", |b| {
        b.iter(|| scf_solve(black_box(&v), &init, p, s.constants).unwrap())
    });
    c.bench_function("minimize_energy/oscillator_4001", |b| {
        b.iter(|| minimize_energy(black_box(&v), &init, p, s.constants).unwrap())
    });
    let rho = s.density(&g).unwrap();
    c.bench_function("log_derivative/oscillator_4001", |b| {
        b.iter(|| log_derivative(black_box(&rho)))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = solvers
}
criterion_main!(benches);
