//! Scene synthesis against direct convolution and geometry oracles.

#![allow(clippy::needless_range_loop)]

mod common;

use srosync::noise::GaussianNoise;
use srosync::room::{distance, synthesize_scene, SceneConfig, SroSetup, SPEED_OF_SOUND};
use srosync::signal::TimeSignal;

const FS: f64 = 16000.0;

fn quiet_scene() -> SceneConfig {
    SceneConfig { noise_level_db: None, render_ears: false, ..SceneConfig::evaluation_scene() }
}

fn stereo_noise(seed: u64, len: usize) -> TimeSignal {
    let mut rng = GaussianNoise::new(seed);
    TimeSignal::new(vec![rng.vec(len, 0.5), rng.vec(len, 0.5)], FS).unwrap()
}

#[test]
fn no_sro_render_equals_direct_convolution_mix() {
    let cfg = quiet_scene();
    let len = (1.5 * FS) as usize;
    let playback = stereo_noise(42, len);
    let render = synthesize_scene(&cfg, &playback).unwrap();

    for m in 0..cfg.mic_count {
        let mut oracle = vec![0.0; len + render.rirs.len() - 1];
        for q in 0..2 {
            let conv = common::convolve_direct(playback.channel(q), render.rirs.mic(q, m));
            for (o, c) in oracle.iter_mut().zip(conv) {
                *o += c;
            }
        }
        let got = render.mics.channel(m);
        let snr = srosync::signal::snr_db(&oracle, got, 0);
        assert!(snr >= 100.0, "mic {m}: {snr:.1} dB vs direct convolution");
    }
}

#[test]
fn superposition_of_single_speaker_renders() {
    let cfg = quiet_scene();
    let len = FS as usize;
    let playback = stereo_noise(7, len);
    let solo1 = TimeSignal::new(
        vec![playback.channel(0).to_vec(), vec![0.0; len]],
        FS,
    )
    .unwrap();
    let solo2 = TimeSignal::new(
        vec![vec![0.0; len], playback.channel(1).to_vec()],
        FS,
    )
    .unwrap();

    let both = synthesize_scene(&cfg, &playback).unwrap();
    let r1 = synthesize_scene(&cfg, &solo1).unwrap();
    let r2 = synthesize_scene(&cfg, &solo2).unwrap();

    for m in 0..cfg.mic_count {
        for i in 0..both.mics.len() {
            let sum = r1.mics.channel(m)[i] + r2.mics.channel(m)[i];
            let v = both.mics.channel(m)[i];
            assert!(
                (sum - v).abs() <= 1e-9 * v.abs().max(1.0),
                "mic {m} sample {i}: {sum} vs {v}"
            );
        }
    }
}

#[test]
fn silent_speaker_contributes_nothing() {
    // the premise of the solo initialization phase
    let mut cfg = quiet_scene();
    cfg.sro = SroSetup::new(0.0, 30.0, -45.0).unwrap();
    let len = FS as usize;
    let playback = stereo_noise(9, len);
    let solo = TimeSignal::new(vec![playback.channel(0).to_vec(), vec![0.0; len]], FS).unwrap();
    let render = synthesize_scene(&cfg, &solo).unwrap();

    // re-render with speaker 1 alone *and* the same offsets: identical
    let again = synthesize_scene(&cfg, &solo).unwrap();
    for m in 0..cfg.mic_count {
        assert_eq!(render.mics.channel(m), again.mics.channel(m), "determinism");
    }
    // energy must all come from speaker 1: zeroing it silences the array
    let silent = TimeSignal::zeros(2, len, FS);
    let nothing = synthesize_scene(&cfg, &silent).unwrap();
    for m in 0..cfg.mic_count {
        assert!(nothing.mics.rms(m) == 0.0);
    }
}

#[test]
fn evaluation_geometry_direct_delays_match_distances() {
    let mut cfg = SceneConfig::evaluation_scene();
    cfg.noise_level_db = None;
    let playback = stereo_noise(3, FS as usize);
    let render = synthesize_scene(&cfg, &playback).unwrap();

    let mics = cfg.mic_positions();
    for q in 0..2 {
        for (m, mic_pos) in mics.iter().enumerate() {
            let expected = distance(cfg.sources[q], *mic_pos) / SPEED_OF_SOUND * FS;
            let peak = render.rirs.direct_peak(q, m) as f64;
            assert!(
                (peak - expected).abs() <= 1.0,
                "source {q} mic {m}: peak {peak} vs {expected:.2}"
            );
        }
        for ear in 0..2 {
            let expected =
                distance(cfg.sources[q], cfg.ear_positions()[ear]) / SPEED_OF_SOUND * FS;
            let peak = render.rirs.direct_peak(q, cfg.mic_count + ear) as f64;
            assert!(
                (peak - expected).abs() <= 1.0,
                "source {q} ear {ear}: peak {peak} vs {expected:.2}"
            );
        }
    }
}

#[test]
fn noise_level_sets_measured_snr() {
    let mut cfg = quiet_scene();
    let len = (4.0 * FS) as usize;
    let playback = stereo_noise(5, len);
    let clean = synthesize_scene(&cfg, &playback).unwrap();
    cfg.noise_level_db = Some(-40.0);
    cfg.noise_seed = 123;
    let noisy = synthesize_scene(&cfg, &playback).unwrap();

    for m in 0..cfg.mic_count {
        let snr = srosync::signal::snr_db(clean.mics.channel(m), noisy.mics.channel(m), 0);
        assert!((snr - 40.0).abs() <= 0.5, "mic {m}: snr {snr:.2} dB");
    }
}

#[test]
fn per_path_offsets_shift_each_contribution() {
    // with only speaker 1 playing a sinusoid and a combined offset of
    // eps1 + eps0, the mic sees the tone scaled by (1 + eps1 + eps0)
    let mut cfg = quiet_scene();
    cfg.sro = SroSetup::new(40.0, 60.0, 0.0).unwrap();
    let len = (20.0 * FS) as usize;
    let tone: Vec<f64> =
        (0..len).map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / FS).sin()).collect();
    let playback = TimeSignal::new(vec![tone.clone(), vec![0.0; len]], FS).unwrap();
    let render = synthesize_scene(&cfg, &playback).unwrap();

    let f = common::zero_crossing_frequency(render.mics.channel(0), FS, 16384);
    let expected = 440.0 * (1.0 + 100e-6);
    assert!(
        (f / expected - 1.0).abs() < 2e-6,
        "mic tone at {f:.5} Hz, expected {expected:.5}"
    );
}

#[test]
fn external_rir_directory_bypasses_the_simulator() {
    let dir = std::env::temp_dir().join(format!("srosync_extrir_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();

    // two sources x two mics, trivial one-tap responses at different lags
    for q in 1..=2usize {
        for m in 1..=2usize {
            let mut h = vec![0.0f64; 64];
            h[q * 10 + m] = 1.0;
            let sig = TimeSignal::mono(h, FS).unwrap();
            srosync::wav::write_wav(dir.join(format!("rir_s{q}_m{m}.wav")), &sig).unwrap();
        }
    }
    let cfg = SceneConfig {
        mic_count: 2,
        external_rirs: Some(dir.clone()),
        ..quiet_scene()
    };
    let len = 4000;
    let playback = stereo_noise(8, len);
    let render = synthesize_scene(&cfg, &playback).unwrap();
    assert_eq!(render.rirs.direct_peak(0, 1), 12);
    assert_eq!(render.rirs.direct_peak(1, 0), 21);
    // mic 0 = x1 delayed 11 + x2 delayed 21
    let got = render.mics.channel(0);
    for i in 100..len {
        let want = playback.channel(0)[i - 11] + playback.channel(1)[i - 21];
        assert!((got[i] - want).abs() < 1e-9);
    }
    std::fs::remove_dir_all(&dir).ok();
}
