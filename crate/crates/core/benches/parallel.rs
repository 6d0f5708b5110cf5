//! Parallel-vs-sequential throughput of the data-parallel kernels.
//!
//! The `parallel` feature routes the hot loops through rayon; here the
//! same public API runs once on a single-thread pool and once on the
//! default pool, so the speedup of each kernel is directly visible.
//! Building the crate without the feature gives the plain-iterator
//! fallback, whose numbers match the single-thread pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use srosync::binaural::{cue_map, CueMapConfig};
use srosync::noise::GaussianNoise;
use srosync::resample::{apply_sro, SroPpm};
use srosync::room::{synthesize_scene, SceneConfig};
use srosync::signal::TimeSignal;
use srosync::stft::{stft, StftConfig};

const FS: f64 = 16000.0;

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let full = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("1-thread", single), ("all-threads", full)]
}

fn bench_rir_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("rir_batch");
    group.sample_size(10);
    let mut cfg = SceneConfig::evaluation_scene();
    cfg.noise_level_db = None;
    let playback = {
        let mut rng = GaussianNoise::new(1);
        TimeSignal::new(vec![rng.vec(8000, 0.3), rng.vec(8000, 0.3)], FS).unwrap()
    };
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::new("scene_eval", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| synthesize_scene(&cfg, &playback).unwrap()));
        });
    }
    group.finish();
}

fn bench_resampler(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_sro_10s");
    group.sample_size(10);
    let x = TimeSignal::mono(GaussianNoise::new(2).vec((10.0 * FS) as usize, 1.0), FS).unwrap();
    let eps = SroPpm::new(100.0).unwrap();
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::new("overlap_save", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| apply_sro(&x, eps, 8192).unwrap()));
        });
    }
    group.finish();
}

fn bench_stft(c: &mut Criterion) {
    let mut group = c.benchmark_group("stft_4ch_10s");
    group.sample_size(10);
    let mut rng = GaussianNoise::new(3);
    let sig =
        TimeSignal::new((0..4).map(|_| rng.vec((10.0 * FS) as usize, 1.0)).collect(), FS).unwrap();
    let cfg = StftConfig::default();
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::new("forward", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| stft(&sig, &cfg).unwrap()));
        });
    }
    group.finish();
}

fn bench_cue_map(c: &mut Criterion) {
    let mut group = c.benchmark_group("cue_map_10s");
    group.sample_size(10);
    let mut rng = GaussianNoise::new(4);
    let l = rng.vec((10.0 * FS) as usize, 1.0);
    let r = rng.vec((10.0 * FS) as usize, 1.0);
    let cfg = CueMapConfig::default();
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::new("24_bands", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| cue_map(&l, &r, FS, &cfg).unwrap()));
        });
    }
    group.finish();
}

criterion_group!(benches, bench_rir_batch, bench_resampler, bench_stft, bench_cue_map);
criterion_main!(benches);
