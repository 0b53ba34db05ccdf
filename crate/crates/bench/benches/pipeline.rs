//! Criterion benchmarks for the hot paths: per-snapshot GEX aggregation,
//! flip-point grid scans, bootstrap resampling, and the Granger F-test.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gexlab_core::config::{GreeksSource, GridSpec, Thresholds};
use gexlab_core::gex_engine::{compute_flip_point, compute_gex};
use gexlab_core::stats_validator::{bootstrap_rate, granger, Differencing};
use gexlab_core::synth_market::{generate, ScenarioRegime, ScenarioSpec};

fn bench_compute_gex(c: &mut Criterion) {
    let market = generate(&ScenarioSpec::new(ScenarioRegime::PersistentNegative, 1, 7)).unwrap();
    let snapshot = &market.snapshots[0];
    let thresholds = Thresholds::default();
    let grid = GridSpec::default();
    c.bench_function("compute_gex/persistent_negative_day", |b| {
        b.iter(|| {
            compute_gex(
                black_box(snapshot),
                GreeksSource::Recompute,
                &thresholds,
                &grid,
                0.0,
            )
            .unwrap()
        })
    });
}

fn bench_flip_point(c: &mut Criterion) {
    let market = generate(&ScenarioSpec::new(ScenarioRegime::PersistentNegative, 1, 7)).unwrap();
    let snapshot = &market.snapshots[0];
    let mut group = c.benchmark_group("flip_point");
    for points in [81usize, 1_001, 10_001] {
        let grid = GridSpec {
            lo: 0.90,
            hi: 1.10,
            points,
        };
        group.bench_with_input(BenchmarkId::from_parameter(points), &grid, |b, grid| {
            b.iter(|| compute_flip_point(black_box(snapshot), grid, 0.0))
        });
    }
    group.finish();
}

fn bench_bootstrap(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sample: Vec<bool> = (0..242).map(|_| rng.gen_bool(0.715)).collect();
    c.bench_function("bootstrap_rate/10k_iterations_n242", |b| {
        b.iter(|| bootstrap_rate(black_box(&sample), 10_000, 1337))
    });
}

fn bench_granger(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..242).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..242).map(|_| rng.gen_range(-1.0..1.0)).collect();
    c.bench_function("granger/lag2_n242", |b| {
        b.iter(|| granger(black_box(&x), black_box(&y), 2, Differencing::Level).unwrap())
    });
}

criterion_group!(
    benches,
    bench_compute_gex,
    bench_flip_point,
    bench_bootstrap,
    bench_granger
);
criterion_main!(benches);
