//! Streaming sample-rate-offset estimation from coherence drift.
//!
//! Per frame, the complex coherence between the isolated loudspeaker
//! signal and its playback reference is updated from exponentially
//! smoothed cross/auto PSDs. The phase function is the product of the
//! current coherence with the conjugate coherence `L` frames earlier;
//! its temporal average, transformed to the lag domain, peaks at the
//! drift accumulated over those `L` hops. The integer peak is refined
//! to a fractional lag with a golden search on the band-limited
//! interpolation of the correlation, and the offset estimate is
//! `-lag / (L * hop)`. Frames failing the energy-based activity test on
//! either stream update nothing.

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::search::golden_section_max;
use crate::stft::{Spectrogram, StftConfig};

#[derive(Debug, Clone, Copy)]
pub struct DwacdConfig {
    /// Temporal distance L between the two coherence functions, frames.
    pub temporal_distance: usize,
    /// Smoothing of the averaged phase function (alpha_s).
    pub coherence_smoothing: f64,
    /// Smoothing of the emitted offset estimate (gamma).
    pub estimate_smoothing: f64,
    /// Exponential smoothing of the cross/auto PSDs.
    pub psd_smoothing: f64,
    /// Activity threshold, dB below the running peak energy.
    pub activity_threshold_db: f64,
    /// Per-frame decay of the running peak energy.
    pub activity_peak_decay: f64,
    /// Integer lag search range, samples.
    pub lag_limit: usize,
    /// Golden-search tolerance, lag samples.
    pub golden_tol: f64,
    /// Active frames before the first estimate is emitted.
    pub warmup_frames: usize,
    pub hop_size: usize,
    pub fft_size: usize,
    pub sample_rate: f64,
}

impl DwacdConfig {
    pub fn from_stft(stft: &StftConfig) -> Self {
        Self {
            temporal_distance: 8,
            coherence_smoothing: 0.95,
            estimate_smoothing: 0.95,
            psd_smoothing: 0.5,
            activity_threshold_db: 40.0,
            activity_peak_decay: 0.999,
            lag_limit: 50,
            golden_tol: 1e-3,
            warmup_frames: 8 + 5,
            hop_size: stft.hop_size,
            fft_size: stft.fft_size,
            sample_rate: stft.sample_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.temporal_distance == 0 {
            return Err(Error::Config("temporal distance must be >= 1".into()));
        }
        for (name, v) in [
            ("coherence_smoothing", self.coherence_smoothing),
            ("estimate_smoothing", self.estimate_smoothing),
            ("psd_smoothing", self.psd_smoothing),
        ] {
            if !(0.0 < v && v < 1.0) {
                return Err(Error::Config(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if self.lag_limit == 0 || self.lag_limit >= self.fft_size / 2 {
            return Err(Error::Config(format!(
                "lag limit {} out of range for fft size {}",
                self.lag_limit, self.fft_size
            )));
        }
        Ok(())
    }

    /// Seconds spanned by the temporal distance; the drift over this
    /// span is what the lag search measures.
    pub fn measurement_span_samples(&self) -> usize {
        self.temporal_distance * self.hop_size
    }
}

impl Default for DwacdConfig {
    fn default() -> Self {
        Self::from_stft(&StftConfig::default())
    }
}

/// Energy-based activity detector with a slowly decaying running peak.
#[derive(Debug, Clone)]
pub struct ActivityDetector {
    peak: f64,
    threshold_ratio: f64,
    decay: f64,
}

impl ActivityDetector {
    pub fn new(threshold_db: f64, peak_decay: f64) -> Self {
        Self { peak: 0.0, threshold_ratio: 10f64.powf(-threshold_db / 10.0), decay: peak_decay }
    }

    pub fn from_config(cfg: &DwacdConfig) -> Self {
        Self::new(cfg.activity_threshold_db, cfg.activity_peak_decay)
    }

    /// Updates the running peak and reports whether `energy` counts as
    /// active. Zero energy never does.
    pub fn detect(&mut self, energy: f64) -> bool {
        self.peak = (self.peak * self.decay).max(energy);
        energy > 0.0 && energy >= self.peak * self.threshold_ratio
    }
}

pub fn frame_energy(frame: &[Complex64]) -> f64 {
    frame.iter().map(|v| v.norm_sqr()).sum()
}

/// Cross/auto PSD state behind the complex coherence.
#[derive(Debug, Clone)]
pub struct CoherenceTracker {
    cross: Vec<Complex64>,
    auto_z: Vec<f64>,
    auto_x: Vec<f64>,
    smoothing: f64,
    seeded: bool,
}

impl CoherenceTracker {
    pub fn new(bins: usize, smoothing: f64) -> Self {
        Self {
            cross: vec![Complex64::default(); bins],
            auto_z: vec![0.0; bins],
            auto_x: vec![0.0; bins],
            smoothing,
            seeded: false,
        }
    }

    /// Folds one active frame pair into the PSDs and returns the
    /// coherence. Bins with a vanishing auto PSD yield zero.
    pub fn update(&mut self, z: &[Complex64], x: &[Complex64]) -> Result<Vec<Complex64>> {
        if z.len() != self.cross.len() || x.len() != self.cross.len() {
            return Err(Error::Shape(format!(
                "coherence update on {} / {} bins, state has {}",
                z.len(),
                x.len(),
                self.cross.len()
            )));
        }
        // First active frame seeds the recursion instead of averaging
        // against zeros.
        let a = if self.seeded { self.smoothing } else { 0.0 };
        self.seeded = true;
        for k in 0..self.cross.len() {
            self.cross[k] = a * self.cross[k] + (1.0 - a) * z[k] * x[k].conj();
            self.auto_z[k] = a * self.auto_z[k] + (1.0 - a) * z[k].norm_sqr();
            self.auto_x[k] = a * self.auto_x[k] + (1.0 - a) * x[k].norm_sqr();
        }
        Ok(self.coherence())
    }

    pub fn coherence(&self) -> Vec<Complex64> {
        (0..self.cross.len())
            .map(|k| {
                let denom = (self.auto_z[k] * self.auto_x[k]).sqrt();
                if denom <= f64::MIN_POSITIVE {
                    Complex64::default()
                } else {
                    self.cross[k] / denom
                }
            })
            .collect()
    }
}

/// Result of the lag-domain peak search.
#[derive(Debug, Clone, Copy)]
pub struct GccPeak {
    pub lag_int: i64,
    pub lag: f64,
    /// Peak magnitude normalized by the total phase-function weight.
    pub peak: f64,
}

/// Band-limited evaluation of the correlation at a (possibly
/// non-integer) lag from a one-sided phase function.
fn gcc_at(phase_avg: &[Complex64], fft_size: usize, beta: f64) -> f64 {
    let half = fft_size / 2;
    let step = 2.0 * std::f64::consts::PI * beta / fft_size as f64;
    let rot = Complex64::from_polar(1.0, step);
    let mut w = rot; // e^{j step k} starting at k = 1
    let mut acc = phase_avg[0].re;
    for k in 1..half {
        acc += 2.0 * (phase_avg[k] * w).re;
        w *= rot;
    }
    acc += (phase_avg[half] * Complex64::from_polar(1.0, step * half as f64)).re;
    acc
}

/// Integer argmax over `|lag| <= lag_limit` followed by a golden-section
/// refinement in `[lag_int - 0.5, lag_int + 0.5]`.
pub fn refine_gcc_lag(
    phase_avg: &[Complex64],
    fft_size: usize,
    lag_limit: usize,
    tol: f64,
) -> Result<GccPeak> {
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(fft_size);
    refine_gcc_lag_with(phase_avg, fft_size, lag_limit, tol, ifft.as_ref())
}

fn refine_gcc_lag_with(
    phase_avg: &[Complex64],
    fft_size: usize,
    lag_limit: usize,
    tol: f64,
    ifft: &dyn Fft<f64>,
) -> Result<GccPeak> {
    if phase_avg.len() != fft_size / 2 + 1 {
        return Err(Error::Shape(format!(
            "phase function has {} bins, fft size {} wants {}",
            phase_avg.len(),
            fft_size,
            fft_size / 2 + 1
        )));
    }
    let mut buf = vec![Complex64::default(); fft_size];
    buf[..phase_avg.len()].copy_from_slice(phase_avg);
    for k in 1..fft_size / 2 {
        buf[fft_size - k] = phase_avg[k].conj();
    }
    ifft.process(&mut buf);

    let mut best_lag = 0i64;
    let mut best = f64::MIN;
    for lag in -(lag_limit as i64)..=lag_limit as i64 {
        let idx = lag.rem_euclid(fft_size as i64) as usize;
        let v = buf[idx].norm();
        if v > best {
            best = v;
            best_lag = lag;
        }
    }

    let lag = golden_section_max(
        |b| gcc_at(phase_avg, fft_size, b).abs(),
        best_lag as f64 - 0.5,
        best_lag as f64 + 0.5,
        tol,
    )?;

    let weight: f64 = phase_avg[0].norm()
        + 2.0 * phase_avg[1..fft_size / 2].iter().map(|v| v.norm()).sum::<f64>()
        + phase_avg[fft_size / 2].norm();
    let peak = if weight > 0.0 { gcc_at(phase_avg, fft_size, lag).abs() / weight } else { 0.0 };
    Ok(GccPeak { lag_int: best_lag, lag, peak })
}

/// One per-frame record of the estimator output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub raw_ppm: f64,
    pub smoothed_ppm: f64,
    pub active: bool,
    pub gcc_peak: f64,
}

/// Per-frame offset estimates with activity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct SroTrace {
    samples: Vec<TraceSample>,
    hop_size: usize,
    sample_rate: f64,
}

impl SroTrace {
    pub fn new(samples: Vec<TraceSample>, hop_size: usize, sample_rate: f64) -> Self {
        Self { samples, hop_size, sample_rate }
    }

    /// A trace that reports the same offset on every frame, e.g. the
    /// ground truth for oracle compensation.
    pub fn constant(frames: usize, ppm: f64, stft: &StftConfig) -> Self {
        let s = TraceSample { raw_ppm: ppm, smoothed_ppm: ppm, active: true, gcc_peak: 1.0 };
        Self { samples: vec![s; frames], hop_size: stft.hop_size, sample_rate: stft.sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn hop_size(&self) -> usize {
        self.hop_size
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn sample(&self, l: usize) -> &TraceSample {
        &self.samples[l]
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn smoothed_ppm(&self, l: usize) -> f64 {
        self.samples[l].smoothed_ppm
    }

    pub fn raw_ppm(&self, l: usize) -> f64 {
        self.samples[l].raw_ppm
    }

    pub fn active(&self, l: usize) -> bool {
        self.samples[l].active
    }

    pub fn time_s(&self, l: usize) -> f64 {
        l as f64 * self.hop_size as f64 / self.sample_rate
    }

    pub fn final_smoothed_ppm(&self) -> Option<f64> {
        self.samples.last().map(|s| s.smoothed_ppm)
    }

    /// Applies `f` to every per-frame estimate, e.g. to subtract the
    /// known primary-device offset before compensation.
    pub fn map_ppm(&self, f: impl Fn(f64) -> f64) -> SroTrace {
        let samples = self
            .samples
            .iter()
            .map(|s| TraceSample {
                raw_ppm: f(s.raw_ppm),
                smoothed_ppm: f(s.smoothed_ppm),
                ..*s
            })
            .collect();
        SroTrace { samples, hop_size: self.hop_size, sample_rate: self.sample_rate }
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# hop_size={} sample_rate={}", self.hop_size, self.sample_rate)?;
        writeln!(f, "frame_index,time_s,raw_ppm,smoothed_ppm,active,gcc_peak")?;
        for (l, s) in self.samples.iter().enumerate() {
            writeln!(
                f,
                "{},{},{},{},{},{}",
                l,
                self.time_s(l),
                s.raw_ppm,
                s.smoothed_ppm,
                u8::from(s.active),
                s.gcc_peak
            )?;
        }
        Ok(())
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<SroTrace> {
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut hop_size = 0usize;
        let mut sample_rate = 0.0f64;
        let mut samples = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if let Some(meta) = line.strip_prefix('#') {
                for tok in meta.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("hop_size=") {
                        hop_size = v.parse().map_err(|_| Error::Parse(format!("hop_size {v}")))?;
                    } else if let Some(v) = tok.strip_prefix("sample_rate=") {
                        sample_rate =
                            v.parse().map_err(|_| Error::Parse(format!("sample_rate {v}")))?;
                    }
                }
                continue;
            }
            if line.starts_with("frame_index") || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(Error::Parse(format!("trace row needs 6 columns: {line}")));
            }
            let get = |i: usize| -> Result<f64> {
                cols[i].parse().map_err(|_| Error::Parse(format!("bad number {}", cols[i])))
            };
            samples.push(TraceSample {
                raw_ppm: get(2)?,
                smoothed_ppm: get(3)?,
                active: cols[4] == "1",
                gcc_peak: get(5)?,
            });
        }
        if hop_size == 0 || !(sample_rate > 0.0) {
            return Err(Error::Parse("trace csv missing hop_size/sample_rate header".into()));
        }
        Ok(SroTrace { samples, hop_size, sample_rate })
    }
}

/// Streaming estimator state for one loudspeaker.
pub struct Dwacd {
    cfg: DwacdConfig,
    activity_z: ActivityDetector,
    activity_x: ActivityDetector,
    coherence: CoherenceTracker,
    ring: VecDeque<Vec<Complex64>>,
    phase_avg: Vec<Complex64>,
    phase_seeded: bool,
    active_frames: usize,
    smoothed: Option<f64>,
    last_raw: f64,
    last_peak: f64,
    ifft: Arc<dyn Fft<f64>>,
}

impl Dwacd {
    pub fn new(cfg: DwacdConfig) -> Result<Self> {
        cfg.validate()?;
        let bins = cfg.fft_size / 2 + 1;
        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(cfg.fft_size);
        Ok(Self {
            activity_z: ActivityDetector::from_config(&cfg),
            activity_x: ActivityDetector::from_config(&cfg),
            coherence: CoherenceTracker::new(bins, cfg.psd_smoothing),
            ring: VecDeque::with_capacity(cfg.temporal_distance + 1),
            phase_avg: vec![Complex64::default(); bins],
            phase_seeded: false,
            active_frames: 0,
            smoothed: None,
            last_raw: 0.0,
            last_peak: 0.0,
            cfg,
            ifft,
        })
    }

    pub fn config(&self) -> &DwacdConfig {
        &self.cfg
    }

    /// The temporally averaged phase function P[k].
    pub fn phase_function(&self) -> &[Complex64] {
        &self.phase_avg
    }

    /// Ingests one frame pair and returns the per-frame trace record.
    /// Inactive frames hold the previous estimate.
    pub fn push_frame(&mut self, z: &[Complex64], x: &[Complex64]) -> Result<TraceSample> {
        let active =
            self.activity_z.detect(frame_energy(z)) & self.activity_x.detect(frame_energy(x));

        if active {
            let gamma = self.coherence.update(z, x)?;
            if self.ring.len() > self.cfg.temporal_distance {
                self.ring.pop_front();
            }
            self.ring.push_back(gamma);
            self.active_frames += 1;

            if self.ring.len() == self.cfg.temporal_distance + 1 {
                let newest = self.ring.back().unwrap();
                let oldest = self.ring.front().unwrap();
                let a = if self.phase_seeded { self.cfg.coherence_smoothing } else { 0.0 };
                self.phase_seeded = true;
                for k in 0..self.phase_avg.len() {
                    let prod = newest[k] * oldest[k].conj();
                    self.phase_avg[k] = a * self.phase_avg[k] + (1.0 - a) * prod;
                }
            }

            if self.active_frames >= self.cfg.warmup_frames {
                let peak = refine_gcc_lag_with(
                    &self.phase_avg,
                    self.cfg.fft_size,
                    self.cfg.lag_limit,
                    self.cfg.golden_tol,
                    self.ifft.as_ref(),
                )?;
                let raw_ppm =
                    -peak.lag / self.cfg.measurement_span_samples() as f64 * 1e6;
                let g = self.cfg.estimate_smoothing;
                let smoothed = match self.smoothed {
                    Some(prev) => g * prev + (1.0 - g) * raw_ppm,
                    None => raw_ppm,
                };
                self.smoothed = Some(smoothed);
                self.last_raw = raw_ppm;
                self.last_peak = peak.peak;
            }
        }

        Ok(TraceSample {
            raw_ppm: self.last_raw,
            smoothed_ppm: self.smoothed.unwrap_or(0.0),
            active,
            gcc_peak: self.last_peak,
        })
    }
}

/// Runs the estimator over frame-aligned spectrograms of the isolated
/// loudspeaker signal and its playback reference.
pub fn run_dwacd(z: &Spectrogram, x: &Spectrogram, cfg: &DwacdConfig) -> Result<SroTrace> {
    if z.channels() != 1 || x.channels() != 1 {
        return Err(Error::Shape("run_dwacd wants single-channel spectrograms".into()));
    }
    if z.frames() != x.frames() || z.bins() != x.bins() {
        return Err(Error::Shape(format!(
            "unaligned spectrograms: {}x{} vs {}x{}",
            z.frames(),
            z.bins(),
            x.frames(),
            x.bins()
        )));
    }
    let mut est = Dwacd::new(*cfg)?;
    let mut samples = Vec::with_capacity(z.frames());
    for l in 0..z.frames() {
        samples.push(est.push_frame(z.frame(0, l), x.frame(0, l))?);
    }
    Ok(SroTrace::new(samples, cfg.hop_size, cfg.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::GaussianNoise;

    fn white_frame(rng: &mut GaussianNoise, bins: usize) -> Vec<Complex64> {
        (0..bins).map(|_| Complex64::new(rng.sample(), rng.sample())).collect()
    }

    #[test]
    fn activity_detector_edges() {
        let mut det = ActivityDetector::new(40.0, 0.999);
        assert!(!det.detect(0.0), "all-zero frame is inactive");
        assert!(det.detect(1.0), "frame at running peak is active");
        // -60 dB frame after a 0 dB peak with a 40 dB threshold
        assert!(!det.detect(1e-6));
    }

    #[test]
    fn self_coherence_converges_to_one() {
        let bins = 129;
        let mut tracker = CoherenceTracker::new(bins, 0.5);
        let mut rng = GaussianNoise::new(3);
        let mut gamma = Vec::new();
        for _ in 0..50 {
            let f = white_frame(&mut rng, bins);
            gamma = tracker.update(&f, &f).unwrap();
        }
        for g in &gamma {
            assert!((g - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn independent_streams_decohere() {
        let bins = 65;
        let mut tracker = CoherenceTracker::new(bins, 0.995);
        let mut rng = GaussianNoise::new(4);
        let mut gamma = Vec::new();
        for _ in 0..8000 {
            let a = white_frame(&mut rng, bins);
            let b = white_frame(&mut rng, bins);
            gamma = tracker.update(&a, &b).unwrap();
        }
        let mean: f64 = gamma.iter().map(|g| g.norm()).sum::<f64>() / bins as f64;
        assert!(mean < 0.1, "mean |coherence| {mean}");
    }

    #[test]
    fn coherence_magnitude_never_exceeds_one() {
        let bins = 33;
        let mut tracker = CoherenceTracker::new(bins, 0.7);
        let mut rng = GaussianNoise::new(5);
        for i in 0..500 {
            let a = white_frame(&mut rng, bins);
            let b = if i % 3 == 0 {
                a.clone()
            } else {
                white_frame(&mut rng, bins)
            };
            let gamma = tracker.update(&a, &b).unwrap();
            for g in &gamma {
                assert!(g.norm() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn delayed_stream_shows_linear_phase() {
        // Z equals X delayed by tau samples; steady-state coherence
        // phase must follow -2*pi*k*tau/fft across mid-band bins.
        let nfft = 256;
        let bins = nfft / 2 + 1;
        let tau = 3.0;
        let mut tracker = CoherenceTracker::new(bins, 0.5);
        let mut rng = GaussianNoise::new(6);
        let mut gamma = Vec::new();
        for _ in 0..200 {
            let x = white_frame(&mut rng, bins);
            let z: Vec<Complex64> = x
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    v * Complex64::from_polar(
                        1.0,
                        -2.0 * std::f64::consts::PI * k as f64 * tau / nfft as f64,
                    )
                })
                .collect();
            gamma = tracker.update(&z, &x).unwrap();
        }
        for k in bins / 4..3 * bins / 4 {
            let expected = -2.0 * std::f64::consts::PI * k as f64 * tau / nfft as f64;
            let diff = (gamma[k].arg() - expected).rem_euclid(2.0 * std::f64::consts::PI);
            let diff = diff.min(2.0 * std::f64::consts::PI - diff);
            assert!(diff < 0.05, "bin {k}: phase off by {diff}");
        }
    }

    #[test]
    fn constructed_phase_ramp_recovers_integer_lag() {
        let nfft = 8192;
        let bins = nfft / 2 + 1;
        let beta0 = 3.0;
        let p: Vec<Complex64> = (0..bins)
            .map(|k| {
                Complex64::from_polar(
                    1.0,
                    -2.0 * std::f64::consts::PI * k as f64 * beta0 / nfft as f64,
                )
            })
            .collect();
        let peak = refine_gcc_lag(&p, nfft, 50, 1e-4).unwrap();
        assert_eq!(peak.lag_int, 3);
        assert!((peak.lag - beta0).abs() < 1e-3, "lag {}", peak.lag);
        assert!(peak.peak > 0.999);
    }

    #[test]
    fn constructed_fractional_ramp_beats_integer_argmax() {
        let nfft = 8192;
        let bins = nfft / 2 + 1;
        let beta0 = 2.4;
        let p: Vec<Complex64> = (0..bins)
            .map(|k| {
                Complex64::from_polar(
                    1.0,
                    -2.0 * std::f64::consts::PI * k as f64 * beta0 / nfft as f64,
                )
            })
            .collect();
        let peak = refine_gcc_lag(&p, nfft, 50, 1e-4).unwrap();
        assert_eq!(peak.lag_int, 2);
        assert!((peak.lag - beta0).abs() < 0.01, "refined lag {}", peak.lag);

        // dense grid oracle
        let mut best = (f64::MIN, 0.0);
        let mut b = 1.5;
        while b <= 3.5 {
            let v = gcc_at(&p, nfft, b).abs();
            if v > best.0 {
                best = (v, b);
            }
            b += 1e-4;
        }
        assert!((peak.lag - best.1).abs() < 5e-3, "golden {} vs grid {}", peak.lag, best.1);
    }

    #[test]
    fn flat_phase_function_means_zero_offset() {
        let nfft = 1024;
        let bins = nfft / 2 + 1;
        let p = vec![Complex64::new(1.0, 0.0); bins];
        let peak = refine_gcc_lag(&p, nfft, 50, 1e-4).unwrap();
        assert_eq!(peak.lag_int, 0);
        assert!(peak.lag.abs() < 1e-3);
    }

    #[test]
    fn estimator_not_ready_before_warmup() {
        let stft = StftConfig { window_size: 256, hop_size: 64, fft_size: 256, ..StftConfig::default() };
        let cfg = DwacdConfig::from_stft(&stft);
        let mut est = Dwacd::new(cfg).unwrap();
        let mut rng = GaussianNoise::new(8);
        for l in 0..cfg.warmup_frames - 1 {
            let f = white_frame(&mut rng, 129);
            let s = est.push_frame(&f, &f).unwrap();
            assert_eq!(s.smoothed_ppm, 0.0, "no estimate before warmup at frame {l}");
            assert_eq!(s.gcc_peak, 0.0);
        }
    }

    #[test]
    fn identical_streams_estimate_zero() {
        let stft = StftConfig { window_size: 512, hop_size: 128, fft_size: 512, ..StftConfig::default() };
        let cfg = DwacdConfig::from_stft(&stft);
        let mut est = Dwacd::new(cfg).unwrap();
        let mut rng = GaussianNoise::new(9);
        let mut last = TraceSample { raw_ppm: 1.0, smoothed_ppm: 1.0, active: false, gcc_peak: 0.0 };
        for _ in 0..60 {
            let f = white_frame(&mut rng, 257);
            last = est.push_frame(&f, &f).unwrap();
        }
        assert!(last.active);
        assert!(last.smoothed_ppm.abs() < 1e-6, "estimate {}", last.smoothed_ppm);
        assert!(last.gcc_peak > 0.99);
    }

    #[test]
    fn gain_scaling_leaves_estimates_unchanged() {
        let stft = StftConfig { window_size: 512, hop_size: 128, fft_size: 512, ..StftConfig::default() };
        let cfg = DwacdConfig::from_stft(&stft);
        let mut rng = GaussianNoise::new(10);
        let frames: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..60)
            .map(|_| (white_frame(&mut rng, 257), white_frame(&mut rng, 257)))
            .collect();

        let mut a = Dwacd::new(cfg).unwrap();
        let mut b = Dwacd::new(cfg).unwrap();
        for (z, x) in &frames {
            let sz: Vec<Complex64> = z.iter().map(|v| v * 37.5).collect();
            let sx: Vec<Complex64> = x.iter().map(|v| v * 0.011).collect();
            let ra = a.push_frame(z, x).unwrap();
            let rb = b.push_frame(&sz, &sx).unwrap();
            assert!((ra.raw_ppm - rb.raw_ppm).abs() < 1e-9);
            assert!((ra.smoothed_ppm - rb.smoothed_ppm).abs() < 1e-9);
        }
    }

    #[test]
    fn inactive_frames_hold_the_estimate() {
        let stft = StftConfig { window_size: 512, hop_size: 128, fft_size: 512, ..StftConfig::default() };
        let cfg = DwacdConfig::from_stft(&stft);
        let mut est = Dwacd::new(cfg).unwrap();
        let mut rng = GaussianNoise::new(11);
        let mut active_est = 0.0;
        for _ in 0..40 {
            let f = white_frame(&mut rng, 257);
            active_est = est.push_frame(&f, &f).unwrap().smoothed_ppm;
        }
        let silent = vec![Complex64::default(); 257];
        let s = est.push_frame(&silent, &silent).unwrap();
        assert!(!s.active);
        assert_eq!(s.smoothed_ppm, active_est);
    }

    #[test]
    fn trace_csv_roundtrips_exactly() {
        let stft = StftConfig::default();
        let mut trace = SroTrace::constant(5, 12.345678901234567, &stft);
        trace.samples[2].active = false;
        trace.samples[3].raw_ppm = -0.07212468;
        trace.samples[4].gcc_peak = 0.9912;

        let dir = std::env::temp_dir().join(format!("srosync_trace_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trace.csv");
        trace.write_csv(&path).unwrap();
        let back = SroTrace::read_csv(&path).unwrap();
        assert_eq!(trace, back);
        std::fs::remove_dir_all(&dir).ok();
    }
}
