//! Condition orchestration: renders, estimates, compensates, measures
//! and emits the artifacts for one experimental condition.
//!
//! The four conditions of a run share the same program material:
//!
//! * `reference`      — offsets zeroed, ears hear the material as is.
//! * `uncompensated`  — each ear channel resampled by its loudspeaker
//!   offset.
//! * `oracle_comp`    — playback compensated with the true offsets
//!   before the loudspeaker clocks re-apply them.
//! * `estimated_comp` — solo initialization phases, oracle RTFs, LCMV
//!   isolation, streaming offset estimation, causal compensation of
//!   the playback, re-render.

use std::path::{Path, PathBuf};

use srosync::beamform::{beamform, estimate_oracle_rtf, lcmv_weights, RtfMatrix};
use srosync::binaural::{cue_difference, cue_map, CueField, CueMap, CueMapConfig};
use srosync::dwacd::{run_dwacd, ActivityDetector, SroTrace, TraceSample};
use srosync::error::{Error, Result};
use srosync::noise::GaussianNoise;
use srosync::resample::{apply_sro, compensate_sro, SroPpm};
use srosync::room::synthesize_scene;
use srosync::signal::TimeSignal;
use srosync::stft::{istft, stft, StftConfig};

use crate::config::{Condition, EarMode, PlaybackSource, RunConfig};
use crate::manifest::{fnv64, hash_file, RunManifest, Summary};

/// Stereo program material for the evaluation span.
fn build_program(cfg: &RunConfig) -> Result<TimeSignal> {
    let len = (cfg.duration_s * cfg.scene.sample_rate) as usize;
    match &cfg.playback {
        PlaybackSource::Noise => {
            // identical noise in both channels
            let x = GaussianNoise::new(cfg.seed).vec(len, 0.25);
            TimeSignal::new(vec![x.clone(), x], cfg.scene.sample_rate)
        }
        PlaybackSource::Wav(path) => {
            let sig = srosync::wav::read_wav(path)?;
            if (sig.sample_rate() - cfg.scene.sample_rate).abs() > 0.5 {
                return Err(Error::Config(format!(
                    "playback wav rate {} does not match scene rate {}",
                    sig.sample_rate(),
                    cfg.scene.sample_rate
                )));
            }
            if sig.channels() != 2 {
                return Err(Error::Config("playback wav must be stereo".into()));
            }
            if sig.len() < len {
                return Err(Error::Config(format!(
                    "playback wav too short: {} samples, need {len}",
                    sig.len()
                )));
            }
            TimeSignal::new(
                vec![sig.channel(0)[..len].to_vec(), sig.channel(1)[..len].to_vec()],
                cfg.scene.sample_rate,
            )
        }
    }
}

fn mono(samples: Vec<f64>, fs: f64) -> Result<TimeSignal> {
    TimeSignal::mono(samples, fs)
}

/// Frames of `stft` whose analysis window lies entirely inside the
/// sample span `[start, end)`.
fn frames_in_span(cfg: &StftConfig, start: usize, end: usize) -> (usize, usize) {
    let pad = cfg.edge_pad();
    let first = (start + pad).div_ceil(cfg.hop_size);
    let last = (end + pad).saturating_sub(cfg.window_size) / cfg.hop_size;
    (first, last + 1)
}

/// Maps a per-estimation-frame trace onto the compensation framing with
/// strict causality: the value applied around a compensation frame's
/// centre comes from the latest estimation frame fully observed before
/// that centre. `eps0_ppm` (the known primary-device offset) is
/// subtracted on the way.
pub fn causal_compensation_trace(
    estimates: &SroTrace,
    est_cfg: &StftConfig,
    est_first_frame: usize,
    span_start: usize,
    eps0_ppm: f64,
    comp_cfg: &StftConfig,
    comp_frames: usize,
) -> SroTrace {
    let pad = est_cfg.edge_pad() as i64;
    let samples: Vec<TraceSample> = (0..comp_frames)
        .map(|j| {
            let center = comp_cfg.frame_center(j);
            let mut chosen = 0.0;
            // estimate i is available once its window has been observed
            for i in (0..estimates.len()).rev() {
                let global = (est_first_frame + i) as i64;
                let available =
                    (global * est_cfg.hop_size as i64 - pad + est_cfg.window_size as i64) as f64
                        - span_start as f64;
                if available <= center {
                    chosen = estimates.smoothed_ppm(i) - eps0_ppm;
                    break;
                }
            }
            TraceSample { raw_ppm: chosen, smoothed_ppm: chosen, active: true, gcc_peak: 1.0 }
        })
        .collect();
    SroTrace::new(samples, comp_cfg.hop_size, comp_cfg.sample_rate)
}

/// STFT-domain compensation of one playback channel by a constant or
/// estimated trace, back to the time domain.
fn compensate_channel(x: &TimeSignal, trace_ppm: TracePlan, comp_cfg: &StftConfig) -> Result<TimeSignal> {
    let spec = stft(x, comp_cfg)?;
    let trace = match trace_ppm {
        TracePlan::Constant(ppm) => SroTrace::constant(spec.frames(), ppm, comp_cfg),
        TracePlan::PerFrame(t) => {
            if t.len() < spec.frames() {
                // hold the last estimate over the trailing edge frames
                let mut samples = t.samples().to_vec();
                let last = *samples.last().unwrap_or(&TraceSample {
                    raw_ppm: 0.0,
                    smoothed_ppm: 0.0,
                    active: true,
                    gcc_peak: 1.0,
                });
                samples.resize(spec.frames(), last);
                SroTrace::new(samples, comp_cfg.hop_size, comp_cfg.sample_rate)
            } else {
                t.clone()
            }
        }
    };
    let trace = SroTrace::new(
        trace.samples()[..spec.frames()].to_vec(),
        comp_cfg.hop_size,
        comp_cfg.sample_rate,
    );
    istft(&compensate_sro(&spec, &trace)?)
}

enum TracePlan {
    Constant(f64),
    PerFrame(SroTrace),
}

/// Result of the estimation stage of `estimated_comp`.
pub struct EstimationStage {
    pub traces: [SroTrace; 2],
    pub rtf: RtfMatrix,
    /// First estimation frame fed to the estimator (global index).
    pub first_frame: usize,
}

/// Renders the scene over the full solo+program timeline and runs the
/// RTF/beamformer/estimator chain.
pub fn run_estimation(cfg: &RunConfig, program: &TimeSignal) -> Result<EstimationStage> {
    let fs = cfg.scene.sample_rate;
    let solo_len = (cfg.solo_phase_s * fs) as usize;
    let prog_len = program.len();
    let total = 2 * solo_len + prog_len;

    // timeline: speaker 1 solo, speaker 2 solo, both
    let mut ch1 = Vec::with_capacity(total);
    let mut ch2 = Vec::with_capacity(total);
    let mut rng = GaussianNoise::new(cfg.seed ^ 0x501f_0001);
    ch1.extend(rng.vec(solo_len, 0.25));
    ch1.extend(std::iter::repeat_n(0.0, solo_len));
    ch1.extend_from_slice(program.channel(0));
    let mut rng = GaussianNoise::new(cfg.seed ^ 0x501f_0002);
    ch2.extend(std::iter::repeat_n(0.0, solo_len));
    ch2.extend(rng.vec(solo_len, 0.25));
    ch2.extend_from_slice(program.channel(1));
    let playback = TimeSignal::new(vec![ch1, ch2], fs)?;

    let mut scene = cfg.scene.clone();
    scene.render_ears = false;
    let render = synthesize_scene(&scene, &playback)?;

    let mic_spec = stft(&render.mics, &cfg.stft)?;
    let play_spec = stft(&playback, &cfg.stft)?;
    let dwacd_cfg = cfg.dwacd_config();
    let detector = ActivityDetector::new(cfg.activity_threshold_db, 0.999);

    // oracle RTFs from the solo spans (windows kept clear of the edges)
    let margin = cfg.stft.window_size;
    let spans = [(margin, solo_len - margin), (solo_len + margin, 2 * solo_len - margin)];
    let mut columns = Vec::with_capacity(2);
    for (q, (a, b)) in spans.iter().enumerate() {
        let (l0, l1) = frames_in_span(&cfg.stft, *a, *b);
        let solo_mics = mic_spec.slice_frames(l0, l1);
        let solo_play = play_spec.select_channel(q).slice_frames(l0, l1);
        columns.push(estimate_oracle_rtf(&solo_mics, &solo_play, &detector)?);
    }
    let rtf = RtfMatrix::new([columns.remove(0), columns.remove(0)])?;

    // streaming estimation over the both-active span
    let (b0, _) = frames_in_span(&cfg.stft, 2 * solo_len, total);
    let frames_end = mic_spec.frames().min(play_spec.frames());
    let mut traces = Vec::with_capacity(2);
    for q in 0..2 {
        let weights = lcmv_weights(&rtf, q, cfg.lcmv_alpha)?;
        let isolated = beamform(&weights, &mic_spec)?;
        let z = isolated.slice_frames(b0, frames_end);
        let x = play_spec.select_channel(q).slice_frames(b0, frames_end);
        traces.push(run_dwacd(&z, &x, &dwacd_cfg)?);
    }

    Ok(EstimationStage {
        traces: [traces.remove(0), traces.remove(0)],
        rtf,
        first_frame: b0,
    })
}

/// Ear signals for a condition, given the (possibly compensated)
/// playback pair.
fn render_ears(cfg: &RunConfig, playback: &TimeSignal, offsets: [SroPpm; 2]) -> Result<TimeSignal> {
    let fs = cfg.scene.sample_rate;
    match cfg.ear_mode {
        EarMode::Direct => {
            let l = apply_sro(
                &mono(playback.channel(0).to_vec(), fs)?,
                offsets[0],
                cfg.scene.resampler_segment,
            )?;
            let r = apply_sro(
                &mono(playback.channel(1).to_vec(), fs)?,
                offsets[1],
                cfg.scene.resampler_segment,
            )?;
            TimeSignal::new(
                vec![l.into_channels().remove(0), r.into_channels().remove(0)],
                fs,
            )
        }
        EarMode::Room => {
            let mut scene = cfg.scene.clone();
            scene.render_ears = true;
            scene.noise_level_db = None;
            scene.sro = srosync::room::SroSetup {
                primary: SroPpm::zero(),
                loudspeakers: offsets,
            };
            let render = synthesize_scene(&scene, playback)?;
            Ok(render.ears.expect("ears requested"))
        }
    }
}

pub struct ConditionResult {
    pub manifest: RunManifest,
    pub condition_map: CueMap,
    pub reference_map: CueMap,
    pub difference: CueMap,
    pub traces: Option<[SroTrace; 2]>,
}

/// Runs one condition end to end, emitting WAV/CSV artifacts and the
/// manifest under `output_dir/<condition>/`.
pub fn run_condition(cfg: &RunConfig) -> Result<RunManifest> {
    Ok(run_condition_full(cfg)?.manifest)
}

pub fn run_condition_full(cfg: &RunConfig) -> Result<ConditionResult> {
    cfg.validate()?;
    let out_dir = cfg.output_dir.join(cfg.condition.name());
    prepare_output_dir(&out_dir)?;

    let mut written: Vec<PathBuf> = Vec::new();
    match run_condition_inner(cfg, &out_dir, &mut written) {
        Ok(result) => Ok(result),
        Err(e) => {
            // no partial outputs on failure
            for path in written {
                let _ = std::fs::remove_file(path);
            }
            let _ = std::fs::remove_dir(&out_dir);
            Err(e)
        }
    }
}

fn prepare_output_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let probe = dir.join(".write_probe");
    std::fs::write(&probe, b"probe")?;
    std::fs::remove_file(&probe)?;
    Ok(())
}

fn run_condition_inner(
    cfg: &RunConfig,
    out_dir: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<ConditionResult> {
    let fs = cfg.scene.sample_rate;
    let program = build_program(cfg)?;
    let comp_cfg = cfg.effective_comp_stft()?;
    let eps = [cfg.scene.sro.loudspeakers[0], cfg.scene.sro.loudspeakers[1]];
    let eps0 = cfg.scene.sro.primary;

    let mut traces: Option<[SroTrace; 2]> = None;
    let mut rtf: Option<RtfMatrix> = None;

    let ears = match cfg.condition {
        Condition::Reference => render_ears(cfg, &program, [SroPpm::zero(), SroPpm::zero()])?,
        Condition::Uncompensated => render_ears(cfg, &program, eps)?,
        Condition::OracleComp => {
            // ground-truth compensation: the estimator would converge to
            // eps_q + eps0; the known eps0 is subtracted before use
            let mut channels = Vec::with_capacity(2);
            for q in 0..2 {
                let compensated = compensate_channel(
                    &mono(program.channel(q).to_vec(), fs)?,
                    TracePlan::Constant(eps[q].ppm()),
                    &comp_cfg,
                )?;
                channels.push(compensated.into_channels().remove(0));
            }
            render_ears(cfg, &TimeSignal::new(channels, fs)?, eps)?
        }
        Condition::EstimatedComp => {
            let stage = run_estimation(cfg, &program)?;
            let solo_len = (cfg.solo_phase_s * fs) as usize;
            let mut channels = Vec::with_capacity(2);
            for q in 0..2 {
                let comp_frames = comp_cfg.frames_for_len(program.len());
                let trace = causal_compensation_trace(
                    &stage.traces[q],
                    &cfg.stft,
                    stage.first_frame,
                    2 * solo_len,
                    eps0.ppm(),
                    &comp_cfg,
                    comp_frames,
                );
                let compensated = compensate_channel(
                    &mono(program.channel(q).to_vec(), fs)?,
                    TracePlan::PerFrame(trace),
                    &comp_cfg,
                )?;
                channels.push(compensated.into_channels().remove(0));
            }
            traces = Some(stage.traces);
            rtf = Some(stage.rtf);
            render_ears(cfg, &TimeSignal::new(channels, fs)?, eps)?
        }
    };

    // the no-offset rendering is the cue reference for every condition
    let reference_ears = if cfg.condition == Condition::Reference {
        ears.clone()
    } else {
        render_ears(cfg, &program, [SroPpm::zero(), SroPpm::zero()])?
    };

    let cue_cfg = CueMapConfig::default();
    let condition_map = cue_map(ears.channel(0), ears.channel(1), fs, &cue_cfg)?;
    let reference_map =
        cue_map(reference_ears.channel(0), reference_ears.channel(1), fs, &cue_cfg)?;
    let difference = cue_difference(&condition_map, &reference_map)?;

    // emit artifacts
    let mut files: Vec<(PathBuf, u64)> = Vec::new();
    let mut emit = |name: &str, write: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let path = out_dir.join(name);
        write(&path)?;
        written.push(path.clone());
        files.push((PathBuf::from(name), hash_file(&path)?));
        Ok(())
    };

    emit("ears.wav", &|p| srosync::wav::write_wav(p, &ears))?;
    emit("cues.csv", &|p| condition_map.write_csv(p))?;
    emit("cues_reference.csv", &|p| reference_map.write_csv(p))?;
    emit("cues_diff.csv", &|p| difference.write_csv(p))?;
    emit("ic_diff_grid.txt", &|p| difference.write_grid(p, CueField::Ic))?;
    emit("itd_diff_grid.txt", &|p| difference.write_grid(p, CueField::Itd))?;
    if let Some(ts) = &traces {
        emit("trace_q1.csv", &|p| ts[0].write_csv(p))?;
        emit("trace_q2.csv", &|p| ts[1].write_csv(p))?;
    }
    if let Some(r) = &rtf {
        emit("rtf_q1.txt", &|p| r.columns[0].save(p))?;
        emit("rtf_q2.txt", &|p| r.columns[1].save(p))?;
    }

    let final_err = traces.as_ref().map(|ts| {
        [
            (ts[0].final_smoothed_ppm().unwrap_or(f64::NAN)
                - (eps[0].ppm() + eps0.ppm()))
            .abs(),
            (ts[1].final_smoothed_ppm().unwrap_or(f64::NAN)
                - (eps[1].ppm() + eps0.ppm()))
            .abs(),
        ]
    });
    let summary = Summary {
        final_sro_error_ppm: final_err,
        mean_abs_delta_ic: difference.mean_abs_ic(),
        mean_abs_delta_itd_us: difference.mean_abs_itd() * 1e6,
        high_band_abs_delta_ic: difference.mean_abs_ic_at_or_above(2000.0),
    };

    let manifest = RunManifest {
        condition: cfg.condition.name().to_string(),
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_fingerprint(cfg),
        seed: cfg.seed,
        sro_ppm: [eps0.ppm(), eps[0].ppm(), eps[1].ppm()],
        files,
        summary,
    };
    let manifest_path = out_dir.join("manifest.txt");
    manifest.write(&manifest_path)?;
    written.push(manifest_path);

    Ok(ConditionResult { manifest, condition_map, reference_map, difference, traces })
}

/// Deterministic fingerprint over the fields that shape the outputs.
pub fn config_fingerprint(cfg: &RunConfig) -> u64 {
    let scene = &cfg.scene;
    let text = format!(
        "room={:?} rt60={} src={:?} array={:?} r={} m={} ears={:?} fs={} noise={:?} seed={} \
         sro={} {} {} inj={:?} window={} hop={} comp={} L={} as={} g={} act={} alpha={} solo={} \
         cond={} dur={} mode={:?}",
        scene.room,
        scene.rt60,
        scene.sources,
        scene.array_center,
        scene.array_radius,
        scene.mic_count,
        scene.ears,
        scene.sample_rate,
        scene.noise_level_db,
        cfg.seed,
        scene.sro.primary.ppm(),
        scene.sro.loudspeakers[0].ppm(),
        scene.sro.loudspeakers[1].ppm(),
        scene.sro_injection,
        cfg.stft.window_size,
        cfg.stft.hop_size,
        cfg.comp_window,
        cfg.dwacd_distance,
        cfg.dwacd_alpha_s,
        cfg.dwacd_gamma,
        cfg.activity_threshold_db,
        cfg.lcmv_alpha,
        cfg.solo_phase_s,
        cfg.condition.name(),
        cfg.duration_s,
        cfg.ear_mode,
    );
    fnv64(text.as_bytes())
}

/// The three offset configurations of the evaluation grid, as
/// (loudspeaker 1, loudspeaker 2) ppm pairs.
pub const GRID_SRO_PPM: [(f64, f64); 3] = [(10.0, -10.0), (10.0, -50.0), (10.0, -100.0)];

/// Runs every condition at every grid offset configuration.
pub fn run_grid(base: &RunConfig) -> Result<Vec<RunManifest>> {
    let mut jobs = Vec::new();
    for (q1, q2) in GRID_SRO_PPM {
        for condition in Condition::ALL {
            let mut cfg = base.clone();
            cfg.scene.sro = srosync::room::SroSetup::new(base.scene.sro.primary.ppm(), q1, q2)?;
            cfg.condition = condition;
            cfg.output_dir = base.output_dir.join(format!("sro_{q1}_{q2}"));
            jobs.push(cfg);
        }
    }
    let results = srosync::parallel::try_map_indexed(jobs.len(), |i| run_condition(&jobs[i]))?;
    Ok(results)
}

/// Recomputes cue maps from an ear-signal WAV (`metrics` subcommand).
pub fn metrics_from_wav(wav: &Path, out_dir: &Path) -> Result<CueMap> {
    let sig = srosync::wav::read_wav(wav)?;
    if sig.channels() != 2 {
        return Err(Error::Shape(format!("need a stereo wav, got {} channels", sig.channels())));
    }
    prepare_output_dir(out_dir)?;
    let map = cue_map(sig.channel(0), sig.channel(1), sig.sample_rate(), &CueMapConfig::default())?;
    map.write_csv(out_dir.join("cues.csv"))?;
    map.write_grid(out_dir.join("ic_grid.txt"), CueField::Ic)?;
    map.write_grid(out_dir.join("itd_grid.txt"), CueField::Itd)?;
    Ok(map)
}

/// Difference maps between two ear-signal WAVs (`compare` subcommand).
pub fn compare_wavs(wav: &Path, reference: &Path, out_dir: &Path) -> Result<CueMap> {
    let a = srosync::wav::read_wav(wav)?;
    let b = srosync::wav::read_wav(reference)?;
    if a.channels() != 2 || b.channels() != 2 {
        return Err(Error::Shape("compare needs two stereo wavs".into()));
    }
    prepare_output_dir(out_dir)?;
    let cue_cfg = CueMapConfig::default();
    let map_a = cue_map(a.channel(0), a.channel(1), a.sample_rate(), &cue_cfg)?;
    let map_b = cue_map(b.channel(0), b.channel(1), b.sample_rate(), &cue_cfg)?;
    let diff = cue_difference(&map_a, &map_b)?;
    diff.write_csv(out_dir.join("cues_diff.csv"))?;
    diff.write_grid(out_dir.join("ic_diff_grid.txt"), CueField::Ic)?;
    diff.write_grid(out_dir.join("itd_diff_grid.txt"), CueField::Itd)?;
    Ok(diff)
}
