//! Sequential versus rayon execution of the propagation engine.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pauliprop::circuit::{kicked_ising, AngleSpec, Topology};
use pauliprop::engine::{evolve, EngineConfig};
use pauliprop::parallel::default_workers;
use pauliprop::{PauliString, PauliSum};

fn engine(c: &mut Criterion) {
    let topo = Topology::heavy_hex_127();
    let spec = AngleSpec::UniformRandom { low: -FRAC_PI_4, high: FRAC_PI_4, seed: 7 };
    let circuit = kicked_ising(&topo, 5, -FRAC_PI_2, spec).unwrap();
    let obs = PauliSum::single(&PauliString::parse("Z62", 127).unwrap()).unwrap();
    let parallel = default_workers().max(2);

    let mut group = c.benchmark_group("heavy_hex_T5");
    group.sample_size(10);
    for delta in [1e-4, 2e-5] {
        for (name, workers) in [("sequential", 1), ("parallel", parallel)] {
            let cfg = EngineConfig::new(delta).workers(workers);
            group.bench_with_input(BenchmarkId::new(name, delta), &cfg, |b, cfg| {
                b.iter(|| evolve(black_box(&circuit), obs.clone(), cfg).unwrap().0.expectation())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, engine);
criterion_main!(benches);
