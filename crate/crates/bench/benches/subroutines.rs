use std::hint::black_box;

use criterion::{Criterion, criterion_group, criterion_main};

use msmaxmin_bench::medium_horizon;
use msmaxmin_core::model::EntityId;
use msmaxmin_core::solvers::{ExactSolver, Solver};
use msmaxmin_core::stable::{build_index, stable_entity};

fn stability_planning(c: &mut Criterion) {
    // One entity over a wide lookahead window with many players.
    let horizon = medium_horizon(64, 24, 1, 7);
    let window: Vec<_> = (1..=64).map(|t| horizon.instance(t).clone()).collect();
    c.bench_function("build-index-w64-n24", |b| {
        b.iter(|| build_index(EntityId(0), black_box(&window)))
    });
    c.bench_function("stable-entity-w64-n24", |b| {
        b.iter(|| stable_entity(EntityId(0), 1, 64, black_box(&window)))
    });

    let index = build_index(EntityId(0), &window);
    c.bench_function("stab-queries-w64-n24", |b| {
        b.iter(|| {
            for i in 1..=64u32 {
                black_box(index.stab(black_box(i)));
            }
        })
    });
}

fn exact_solver(c: &mut Criterion) {
    let horizon = medium_horizon(1, 5, 11, 9);
    let inst = horizon.instance(1);
    let solver = ExactSolver::default();
    c.bench_function("exact-solver-n5-m11", |b| {
        b.iter(|| solver.solve(black_box(inst), 5).unwrap())
    });
}

criterion_group!(benches, stability_planning, exact_solver);
criterion_main!(benches);
