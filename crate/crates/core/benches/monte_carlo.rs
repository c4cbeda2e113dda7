use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nslab_core::par::{map_indexed, map_indexed_sequential};
use nslab_core::quadvar::{partition_scheme, WienerEnsemble};
use nslab_core::sde::{simulate_with, GalerkinModel};
use nslab_core::SimConfig;

fn ensemble(c: &mut Criterion) {
    let config = SimConfig { radius: 4.0, t_final: 0.1, ..SimConfig::default() };
    let model = GalerkinModel::new(&config).unwrap();
    let mut g = c.benchmark_group("ensemble");
    g.sample_size(10);
    for n in [8usize, 32] {
        g.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| map_indexed(n, |p| simulate_with(&model, &config, p as u64).unwrap().final_state()))
        });
        g.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| map_indexed_sequential(n, |p| simulate_with(&model, &config, p as u64).unwrap().final_state()))
        });
    }
    g.finish();
}

fn holder(c: &mut Criterion) {
    let scheme = partition_scheme(0.1, 1.0).unwrap();
    let ens = WienerEnsemble::sample(WienerEnsemble::grid_for(&[&scheme]), 2, 64, 1).unwrap();
    let norm = |p: usize| black_box(ens.channel(p, 0).holder_norm(0.25));
    let mut g = c.benchmark_group("holder_norms");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| map_indexed(ens.n_paths(), norm)));
    g.bench_function("sequential", |b| b.iter(|| map_indexed_sequential(ens.n_paths(), norm)));
    g.finish();
}

criterion_group!(benches, ensemble, holder);
criterion_main!(benches);
