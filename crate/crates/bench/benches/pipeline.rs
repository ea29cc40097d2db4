use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rosar_bench::{fixture_table, point_scene, strided_table};
use rosar_core::conic::{solve, Tolerances};
use rosar_core::imaging::{image, Backend, ImageGrid, ImageOptions};
use rosar_core::signal::{range_fft, simulate_if};
use rosar_core::synthesis::{build_subproblem, SubproblemState, SynthesisGeometry};
use rosar_core::{JitterModel, PointScene, RadarConfig, SynthesisParams};

fn signal(c: &mut Criterion) {
    let cfg = RadarConfig::default();
    let scene = PointScene::single(std::f64::consts::FRAC_PI_2, 2.0);
    c.bench_function("simulate_if", |b| {
        b.iter(|| simulate_if(&cfg, black_box(&scene), &JitterModel::none()).unwrap())
    });
    let data = point_scene(&cfg);
    c.bench_function("range_fft", |b| b.iter(|| range_fft(black_box(&data), &cfg).unwrap()));
}

fn backends(c: &mut Criterion) {
    let cfg = RadarConfig::default();
    let bins: Vec<usize> = (40..=50).collect();
    let data = point_scene(&cfg);
    let compressed = range_fft(&data, &cfg).unwrap();
    let table = fixture_table()
        .filter(|t| bins.iter().all(|b| t.entries.contains_key(b)))
        .unwrap_or_else(|| strided_table(&cfg, &bins, 3));
    let grid = ImageGrid::polar_bins(&cfg, &bins);
    let opts = ImageOptions {
        threads: 1,
        require_verified: false,
    };
    let mut group = c.benchmark_group("backend");
    group.sample_size(10);
    for backend in Backend::ALL {
        let input = if backend.uses_fft() { &compressed } else { &data };
        group.bench_function(backend.name(), |b| {
            b.iter(|| image(backend, input, &cfg, &grid, Some(&table), Some(7), &opts).unwrap())
        });
    }
    group.finish();

    // Wall-clock should track the pixel count.
    let mut group = c.benchmark_group("sas_pixels");
    group.sample_size(10);
    for span in [5usize, 10] {
        let grid = ImageGrid::polar_bins(&cfg, &bins[..span]);
        group.bench_with_input(BenchmarkId::from_parameter(span * cfg.pulses), &grid, |b, grid| {
            b.iter(|| image(Backend::Sas, &data, &cfg, grid, Some(&table), None, &opts).unwrap())
        });
    }
    group.finish();
}

fn subproblem(c: &mut Criterion) {
    let cfg = RadarConfig {
        pulses: 200,
        ..RadarConfig::default()
    };
    let params = SynthesisParams::default();
    let geom = SynthesisGeometry::new(&cfg, &params, 2.0, 0.035).unwrap();
    let state = SubproblemState::initial(&geom.main);
    let (problem, _) = build_subproblem(&state, &geom, &params).unwrap();
    let mut group = c.benchmark_group("conic");
    group.sample_size(10);
    group.bench_function(format!("subproblem_w{}_s{}", geom.main.len(), geom.sidelobes.len()), |b| {
        b.iter(|| solve(black_box(&problem), &Tolerances::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, signal, backends, subproblem);
criterion_main!(benches);
