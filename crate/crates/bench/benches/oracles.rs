use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use spillover_core::interference::{grid_structure, GridMetric};
use spillover_core::{
    bfs_shells, exact_expectation_ht, misspec_gamma_closed, misspec_gamma_definitional,
    monte_carlo, ring_structure, EdgeList, MisspecTransform, ModelRanges, OutcomeModel,
};

fn enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("enumeration");
    for n in [8usize, 12, 14] {
        let truth = ring_structure(n, 2).unwrap();
        let assumed = truth.apply(&MisspecTransform::SubsetSample { keep: 0.6, seed: 1 }).unwrap();
        let model = OutcomeModel::random(n, 2, ModelRanges::default(), 3).unwrap();
        group.bench_with_input(BenchmarkId::new("gamma_definitional", n), &n, |b, _| {
            b.iter(|| misspec_gamma_definitional(&model, &truth, &assumed, 0.3, 16).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("exact_expectation_ht", n), &n, |b, _| {
            b.iter(|| exact_expectation_ht(&model, &truth, &truth, 0.3, 16).unwrap())
        });
    }
    group.finish();
}

fn closed_form(c: &mut Criterion) {
    let truth = grid_structure(60, 60, 3, GridMetric::Manhattan).unwrap();
    let assumed = truth.apply(&MisspecTransform::EdgeRewire { fraction: 0.3, seed: 5 }).unwrap();
    let model = OutcomeModel::random(truth.n(), 3, ModelRanges::default(), 9).unwrap();
    c.bench_function("gamma_closed_grid_3600", |b| {
        b.iter(|| misspec_gamma_closed(black_box(&model), &truth, &assumed).unwrap())
    });
}

fn shells(c: &mut Criterion) {
    let n = 5000;
    let edges = EdgeList::new(n, (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i * 7 + 3) % n)])).unwrap();
    c.bench_function("bfs_shells_5000_r3", |b| b.iter(|| bfs_shells(black_box(&edges), 3).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let truth = ring_structure(200, 2).unwrap();
    let model = OutcomeModel::random(200, 2, ModelRanges::default(), 1).unwrap();
    c.bench_function("monte_carlo_ring200_1000reps", |b| {
        b.iter(|| monte_carlo(&model, &truth, &truth, 0.2, 1000, 42).unwrap())
    });
}

criterion_group!(benches, enumeration, closed_form, shells, simulation);
criterion_main!(benches);
