//! STFT analysis/synthesis with exact constant-overlap-add reconstruction.
//!
//! Analysis uses a periodic window; synthesis uses the canonical dual
//! window `w[n] / C(n mod hop)` where `C(r) = sum_k w[r + k*hop]^2`, so
//! the overlap-added analysis*synthesis weight is exactly one wherever
//! frame coverage is complete. Signals are zero-padded by
//! `window - hop` at both ends before framing, which makes every sample
//! of the original signal fully covered and keeps frame timestamps
//! consistent across modules.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::TimeSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
    SqrtHann,
}

impl WindowKind {
    pub fn samples(self, len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| {
                let hann =
                    0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos());
                match self {
                    WindowKind::Hann => hann,
                    WindowKind::SqrtHann => hann.sqrt(),
                }
            })
            .collect()
    }
}

/// Framing and transform parameters shared by analysis and synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftConfig {
    pub window_size: usize,
    pub hop_size: usize,
    pub window: WindowKind,
    pub fft_size: usize,
    pub sample_rate: f64,
}

impl Default for StftConfig {
    fn default() -> Self {
        // 8192/2048 at 16 kHz: the segment length and hop the whole
        // pipeline is calibrated for.
        Self {
            window_size: 8192,
            hop_size: 2048,
            window: WindowKind::Hann,
            fft_size: 8192,
            sample_rate: 16000.0,
        }
    }
}

impl StftConfig {
    pub fn new(window_size: usize, hop_size: usize, sample_rate: f64) -> Self {
        Self { window_size, hop_size, window: WindowKind::Hann, fft_size: window_size, sample_rate }
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Leading/trailing zero padding applied before framing.
    pub fn edge_pad(&self) -> usize {
        self.window_size - self.hop_size
    }

    /// Center of frame `l` in signal coordinates (samples, may be
    /// negative for the first frames that mostly cover edge padding).
    pub fn frame_center(&self, l: usize) -> f64 {
        ((l + 1) * self.hop_size) as f64 - 0.5 * self.window_size as f64
    }

    pub fn frame_duration_s(&self) -> f64 {
        self.hop_size as f64 / self.sample_rate
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn frames_for_len(&self, len: usize) -> usize {
        let covered = len + 2 * self.edge_pad();
        (covered - self.window_size).div_ceil(self.hop_size) + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 || self.hop_size == 0 {
            return Err(Error::Config("window and hop must be positive".into()));
        }
        if !self.window_size.is_multiple_of(self.hop_size) {
            return Err(Error::Config(format!(
                "hop {} must divide window {}",
                self.hop_size, self.window_size
            )));
        }
        if self.fft_size < self.window_size {
            return Err(Error::Config(format!(
                "fft size {} smaller than window {}",
                self.fft_size, self.window_size
            )));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        self.check_cola()
    }

    /// Verifies that the analysis/dual-synthesis pair overlap-adds to
    /// one within 1e-10 over a fully covered span.
    fn check_cola(&self) -> Result<()> {
        let analysis = self.window.samples(self.window_size);
        let synthesis = dual_window(&analysis, self.hop_size)?;
        let frames = 4 * self.window_size / self.hop_size;
        let span = (frames - 1) * self.hop_size + self.window_size;
        let mut acc = vec![0.0; span];
        for l in 0..frames {
            for n in 0..self.window_size {
                acc[l * self.hop_size + n] += analysis[n] * synthesis[n];
            }
        }
        // Interior samples only: those covered by a full window's worth
        // of frames.
        let lo = self.window_size - self.hop_size;
        let hi = span - (self.window_size - self.hop_size) - self.window_size + self.hop_size;
        for (i, &v) in acc[lo..hi].iter().enumerate() {
            if (v - 1.0).abs() > 1e-10 {
                return Err(Error::Config(format!(
                    "window/hop pair violates COLA at sample {}: weight {v}",
                    lo + i
                )));
            }
        }
        Ok(())
    }
}

/// Canonical dual of `analysis` at hop `hop`.
fn dual_window(analysis: &[f64], hop: usize) -> Result<Vec<f64>> {
    let mut c = vec![0.0; hop];
    for (i, &w) in analysis.iter().enumerate() {
        c[i % hop] += w * w;
    }
    if c.iter().any(|&v| v < 1e-12) {
        return Err(Error::Config("window has a dead polyphase branch; no dual exists".into()));
    }
    Ok(analysis.iter().enumerate().map(|(i, &w)| w / c[i % hop]).collect())
}

/// Complex time-frequency tensor, channel x frame x bin, one-sided.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    data: Vec<Complex64>,
    channels: usize,
    frames: usize,
    bins: usize,
    config: StftConfig,
    /// Signal-domain index of frame 0's first sample (negative: edge pad).
    start_offset: i64,
    source_len: usize,
}

impl Spectrogram {
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn start_offset(&self) -> i64 {
        self.start_offset
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn frame(&self, ch: usize, l: usize) -> &[Complex64] {
        let base = (ch * self.frames + l) * self.bins;
        &self.data[base..base + self.bins]
    }

    pub fn frame_mut(&mut self, ch: usize, l: usize) -> &mut [Complex64] {
        let base = (ch * self.frames + l) * self.bins;
        &mut self.data[base..base + self.bins]
    }

    pub fn at(&self, ch: usize, l: usize, k: usize) -> Complex64 {
        self.frame(ch, l)[k]
    }

    /// Builds an empty spectrogram with the framing a signal of
    /// `source_len` samples would produce.
    pub fn zeros_like_signal(config: StftConfig, channels: usize, source_len: usize) -> Self {
        let frames = config.frames_for_len(source_len);
        let bins = config.bins();
        Self {
            data: vec![Complex64::default(); channels * frames * bins],
            channels,
            frames,
            bins,
            config,
            start_offset: -(config.edge_pad() as i64),
            source_len,
        }
    }

    /// Analysis-only view of frames `start..end`: frame timestamps keep
    /// their signal-domain meaning via `start_offset`.
    pub fn slice_frames(&self, start: usize, end: usize) -> Spectrogram {
        assert!(start <= end && end <= self.frames, "frame slice out of range");
        let frames = end - start;
        let mut data = Vec::with_capacity(self.channels * frames * self.bins);
        for ch in 0..self.channels {
            for l in start..end {
                data.extend_from_slice(self.frame(ch, l));
            }
        }
        Spectrogram {
            data,
            channels: self.channels,
            frames,
            bins: self.bins,
            config: self.config,
            start_offset: self.start_offset + (start * self.config.hop_size) as i64,
            source_len: self.source_len.saturating_sub(start * self.config.hop_size),
        }
    }

    /// Extracts one channel as a new single-channel spectrogram.
    pub fn select_channel(&self, ch: usize) -> Spectrogram {
        let mut out = Spectrogram {
            data: Vec::with_capacity(self.frames * self.bins),
            channels: 1,
            frames: self.frames,
            bins: self.bins,
            config: self.config,
            start_offset: self.start_offset,
            source_len: self.source_len,
        };
        for l in 0..self.frames {
            out.data.extend_from_slice(self.frame(ch, l));
        }
        out
    }
}

/// Forward STFT of a multi-channel signal.
pub fn stft(signal: &TimeSignal, config: &StftConfig) -> Result<Spectrogram> {
    config.validate()?;
    if signal.len() < config.window_size {
        return Err(Error::InputTooShort { len: signal.len(), min: config.window_size });
    }
    signal.check_finite()?;

    let nw = config.window_size;
    let nh = config.hop_size;
    let nfft = config.fft_size;
    let pad = config.edge_pad();
    let frames = config.frames_for_len(signal.len());
    let bins = config.bins();
    let window = config.window.samples(nw);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nfft);

    let channels = signal.channels();
    let per_channel = crate::parallel::map_indexed(channels, |ch| {
        let samples = signal.channel(ch);
        let mut out = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex64::default(); nfft];
        for l in 0..frames {
            buf.fill(Complex64::default());
            let frame_start = (l * nh) as i64 - pad as i64;
            for n in 0..nw {
                let idx = frame_start + n as i64;
                if idx >= 0 && (idx as usize) < samples.len() {
                    buf[n] = Complex64::new(samples[idx as usize] * window[n], 0.0);
                }
            }
            fft.process(&mut buf);
            out.extend_from_slice(&buf[..bins]);
        }
        out
    });

    let mut data = Vec::with_capacity(channels * frames * bins);
    for ch in per_channel {
        data.extend(ch);
    }
    Ok(Spectrogram {
        data,
        channels,
        frames,
        bins,
        config: *config,
        start_offset: -(pad as i64),
        source_len: signal.len(),
    })
}

/// Inverse STFT; reconstructs `source_len` samples.
pub fn istft(spec: &Spectrogram) -> Result<TimeSignal> {
    let config = spec.config;
    config.validate()?;
    if spec.bins != config.bins() {
        return Err(Error::Config(format!(
            "spectrogram has {} bins, config wants {}",
            spec.bins,
            config.bins()
        )));
    }

    let nw = config.window_size;
    let nh = config.hop_size;
    let nfft = config.fft_size;
    let pad = config.edge_pad();
    let analysis = config.window.samples(nw);
    let synthesis = dual_window(&analysis, nh)?;

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(nfft);
    let scale = 1.0 / nfft as f64;
    let total = (spec.frames - 1) * nh + nw;

    let channels = crate::parallel::map_indexed(spec.channels, |ch| {
        let mut acc = vec![0.0; total];
        let mut buf = vec![Complex64::default(); nfft];
        for l in 0..spec.frames {
            let frame = spec.frame(ch, l);
            buf[..spec.bins].copy_from_slice(frame);
            for k in 1..nfft / 2 {
                buf[nfft - k] = frame[k].conj();
            }
            ifft.process(&mut buf);
            let base = l * nh;
            for n in 0..nw {
                acc[base + n] += buf[n].re * scale * synthesis[n];
            }
        }
        let mut out = vec![0.0; spec.source_len];
        for (i, v) in out.iter_mut().enumerate() {
            let idx = pad + i;
            if idx < acc.len() {
                *v = acc[idx];
            }
        }
        out
    });

    TimeSignal::new(channels, config.sample_rate)
}
