use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use envyfree_bench::{envy_population, erm_instance};
use envyfree_core::envy::envy_all_pairs;
use envyfree_core::erm::solve_randomized_ef_erm;
use envyfree_core::families::natarajan_dim;
use envyfree_core::harness::random_label_family;
use envyfree_core::lowerbound::{build_grid, run_adversarial_experiment, NearestNeighborStrategy};
use envyfree_core::OutcomeSpace;

fn randomized_erm(c: &mut Criterion) {
    let mut group = c.benchmark_group("randomized_ef_erm");
    group.sample_size(10);
    let k = OutcomeSpace::new(3).unwrap();
    for n in [20, 40, 80] {
        let inst = erm_instance(n, 1).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| solve_randomized_ef_erm(&inst.sample, &inst.utility, &inst.loss, k).unwrap())
        });
    }
    group.finish();
}

fn natarajan(c: &mut Criterion) {
    let families: Vec<_> = (0..8).map(|s| random_label_family(s, 64, 12).unwrap()).collect();
    c.bench_function("natarajan_dim/8_families", |b| {
        b.iter(|| families.iter().map(|f| natarajan_dim(f).unwrap()).sum::<usize>())
    });
}

fn envy_pairs(c: &mut Criterion) {
    let (utils, rows) = envy_population(1024, 3).unwrap();
    c.bench_function("envy_all_pairs/1024", |b| b.iter(|| envy_all_pairs(&utils, &rows, 0.0).unwrap()));
}

fn lowerbound(c: &mut Criterion) {
    let world = build_grid(4, 8.0, 0).unwrap();
    let strategy = NearestNeighborStrategy::default();
    c.bench_function("adversarial_grid/q4", |b| {
        b.iter(|| run_adversarial_experiment(&world, &strategy, 0).unwrap())
    });
}

criterion_group!(benches, randomized_erm, natarajan, envy_pairs, lowerbound);
criterion_main!(benches);
