//! Criterion benchmarks for the hot paths: projection, gauge, grid-walk
//! stepping, the noisy-SGD loop, and the exact solver.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dperm_core::geometry::{ConvexBody, ConvexSet};
use dperm_core::losses::{Dataset, Loss, Record};
use dperm_core::mechanisms::{noise_gd, NoiseGdConfig};
use dperm_core::privacy::PrivacyParams;
use dperm_core::sampler::{dense_weight_table, walk_final_cell_dense, GridWalkSpec};
use dperm_core::solver::{minimize, SolverSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench_projection(c: &mut Criterion) {
    let mut group = c.benchmark_group("projection");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let points: Vec<Vec<f64>> = (0..256)
        .map(|_| (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();

    let ball = ConvexBody::unit_ball(8).unwrap();
    group.bench_function("ball_p8", |b| {
        b.iter(|| {
            for x in &points {
                black_box(ball.project(x));
            }
        })
    });

    let bx = ConvexBody::centered_box(vec![1.0; 8]).unwrap();
    group.bench_function("box_p8", |b| {
        b.iter(|| {
            for x in &points {
                black_box(bx.project(x));
            }
        })
    });

    let cap = ConvexBody::unit_ball(8)
        .unwrap()
        .intersect_ball(&[0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.8)
        .unwrap();
    group.bench_function("dykstra_cap_p8", |b| {
        b.iter(|| {
            for x in &points {
                black_box(cap.project(x));
            }
        })
    });
    group.finish();
}

fn bench_gauge(c: &mut Criterion) {
    let cap = ConvexBody::unit_ball(4)
        .unwrap()
        .intersect_ball(&[0.2, 0.1, 0.0, 0.0], 1.2)
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let points: Vec<Vec<f64>> = (0..64)
        .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    c.bench_function("gauge_bisection_cap_p4", |b| {
        b.iter(|| {
            for x in &points {
                black_box(cap.gauge(x).unwrap());
            }
        })
    });
}

fn bench_grid_walk(c: &mut Criterion) {
    let mut group = c.benchmark_group("grid_walk_steps");
    for (dim, cells) in [(1usize, 64usize), (2, 64)] {
        let spec = GridWalkSpec::new(dim, 1.0, 1.0, 0.5, 1.0)
            .unwrap()
            .with_cells_per_axis(cells)
            .with_steps(100_000);
        let mut lw = |c: &[f64]| Ok(-c[0]);
        let table = dense_weight_table(&spec, &mut lw).unwrap();
        group.bench_with_input(BenchmarkId::new("dense_100k", dim), &dim, |b, _| {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            b.iter(|| black_box(walk_final_cell_dense(&spec, &table, &mut rng)))
        });
    }
    group.finish();
}

fn bench_noise_gd(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = Dataset::new(
        (0..100)
            .map(|_| Record::plain(vec![rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)]))
            .collect(),
    )
    .unwrap();
    let loss = Loss::squared_distance(1.0);
    let ball = ConvexBody::unit_ball(2).unwrap();
    c.bench_function("noise_gd_n100_p2", |b| {
        b.iter(|| {
            let mut r = ChaCha8Rng::seed_from_u64(5);
            black_box(
                noise_gd(
                    &data,
                    &loss,
                    &ball,
                    PrivacyParams::new(1.0, 1e-5).unwrap(),
                    &NoiseGdConfig::strongly_convex(),
                    &mut r,
                )
                .unwrap(),
            )
        })
    });
}

fn bench_solver(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let data = Dataset::new(
        (0..500)
            .map(|_| Record::plain(vec![rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)]))
            .collect(),
    )
    .unwrap();
    let loss = Loss::squared_distance(1.0);
    let ball = ConvexBody::unit_ball(2).unwrap();
    c.bench_function("solver_quadratic_n500", |b| {
        b.iter(|| black_box(minimize(&loss, &data, &ball, &SolverSettings::default()).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_projection,
    bench_gauge,
    bench_grid_walk,
    bench_noise_gd,
    bench_solver
);
criterion_main!(benches);
