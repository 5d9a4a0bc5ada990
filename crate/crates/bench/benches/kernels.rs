use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use diffusim_bench::{ring_fixture, supercritical};
use diffusim_core::dynamics::exact_transient;
use diffusim_core::gillespie::evolve_gillespie;
use diffusim_core::harris::{generate_events, Engine};
use diffusim_core::Params;

fn engines(c: &mut Criterion) {
    let (lattice, initial) = ring_fixture(200);
    let params = supercritical();
    let mut seed = 0u64;
    c.bench_function("lazy engine side 200 t 20", |b| {
        b.iter_batched(
            || {
                seed += 1;
                seed
            },
            |s| Engine::simulate(&lattice, &params, &initial, 20.0, s).unwrap(),
            BatchSize::SmallInput,
        )
    });
    c.bench_function("gillespie side 200 t 20", |b| {
        b.iter_batched(
            || {
                seed += 1;
                seed
            },
            |s| evolve_gillespie(&lattice, &params, &initial, 20.0, s).unwrap(),
            BatchSize::SmallInput,
        )
    });
    c.bench_function("eager event stream side 200 t 5", |b| {
        b.iter(|| generate_events(&lattice, &params, 5.0, 7).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let (lattice, initial) = ring_fixture(5);
    let params = Params::new(1.0, 2.0).unwrap();
    c.bench_function("exact transient side 5 t 1", |b| {
        b.iter(|| exact_transient(&lattice, &params, &initial, 1.0).unwrap())
    });
}

criterion_group!(benches, engines, oracle);
criterion_main!(benches);
