//! Sample-rate-offset application and compensation.
//!
//! A device whose clock runs fast by `eps` plays its material at
//! `(1 + eps) * f_s`; in the nominal timebase the signal it produces is
//! `y[n] = x((1 + eps) * n)`, a drift of `eps` samples per sample.
//! [`apply_sro`] realizes that warp with per-segment phase ramps in the
//! frequency domain and overlap-save stitching: the integer part of the
//! accumulated drift moves the segment read position, the fractional
//! remainder becomes a linear phase ramp, and only a short central
//! region of each segment is kept so the drift is effectively constant
//! over everything that reaches the output.
//!
//! [`compensate_sro`] is the STFT-domain inverse: frame `l`, bin `k` of
//! the playback spectrogram is rotated by the conjugate ramp built from
//! the accumulated offset the (possibly time-varying) estimate implies,
//! so that playing the result through the offending device restores the
//! original timing.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dwacd::SroTrace;
use crate::error::{Error, Result};
use crate::signal::TimeSignal;
use crate::stft::{Spectrogram, StftConfig};

/// Sample-rate offset in parts per million.
///
/// Bounded to +/-500 ppm; beyond that the small-offset phase-ramp model
/// breaks down long before any real device would.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SroPpm(f64);

pub const SRO_LIMIT_PPM: f64 = 500.0;

impl SroPpm {
    pub fn new(ppm: f64) -> Result<Self> {
        if !ppm.is_finite() || ppm.abs() > SRO_LIMIT_PPM {
            return Err(Error::SroOutOfRange { ppm, limit: SRO_LIMIT_PPM });
        }
        Ok(Self(ppm))
    }

    pub const fn zero() -> Self {
        Self(0.0)
    }

    pub fn ppm(self) -> f64 {
        self.0
    }

    /// The offset as a plain ratio (ppm * 1e-6).
    pub fn ratio(self) -> f64 {
        self.0 * 1e-6
    }

    /// First-order combination of two offsets in a chain, e.g. a
    /// loudspeaker DAC followed by the primary ADC.
    pub fn combine(self, other: SroPpm) -> Result<SroPpm> {
        SroPpm::new(self.0 + other.0)
    }
}

/// Drift in samples accumulated by frame `l` of the given framing.
pub fn drift_at_frame(l: usize, eps: SroPpm, config: &StftConfig) -> f64 {
    (l * config.hop_size) as f64 * eps.ratio()
}

/// Largest accumulated drift (samples) the phase-ramp model tolerates.
pub fn drift_limit(config: &StftConfig) -> f64 {
    config.window_size as f64 / 4.0
}

/// The per-bin phase ramp modelling a sample-rate offset: unit-magnitude,
/// with phase `-2*pi*k * (l*hop*eps) / fft_size`, i.e. a delay equal to
/// the drift accumulated by frame `l`. Errors once that drift exceeds a
/// quarter window, where the frame-wise shift model stops holding.
pub fn sro_phase_term(k: usize, l: usize, eps: SroPpm, config: &StftConfig) -> Result<Complex64> {
    let drift = drift_at_frame(l, eps, config);
    let limit = drift_limit(config);
    if drift.abs() > limit {
        return Err(Error::ValidityViolated { frame: l, drift, limit });
    }
    let phase = -2.0 * std::f64::consts::PI * k as f64 * drift / config.fft_size as f64;
    Ok(Complex64::from_polar(1.0, phase))
}

/// Lazily evaluated ramp over a whole spectrogram grid.
#[derive(Debug, Clone, Copy)]
pub struct PhaseRamp {
    pub eps: SroPpm,
    pub config: StftConfig,
}

impl PhaseRamp {
    pub fn new(eps: SroPpm, config: StftConfig) -> Self {
        Self { eps, config }
    }

    pub fn factor(&self, k: usize, l: usize) -> Result<Complex64> {
        sro_phase_term(k, l, self.eps, &self.config)
    }

    /// Checks the validity condition through frame `l_max`.
    pub fn validate_frames(&self, l_max: usize) -> Result<()> {
        let drift = drift_at_frame(l_max, self.eps, &self.config);
        let limit = drift_limit(&self.config);
        if drift.abs() > limit {
            return Err(Error::ValidityViolated { frame: l_max, drift, limit });
        }
        Ok(())
    }
}

/// Resamples a single-channel signal by `1 / (1 + eps)` so that its
/// content plays back `(1 + eps)` faster, exactly what a device with a
/// fast clock does to it. Output length equals input length.
pub fn apply_sro(signal: &TimeSignal, eps: SroPpm, segment_len: usize) -> Result<TimeSignal> {
    if signal.channels() != 1 {
        return Err(Error::Shape(format!(
            "apply_sro expects one channel, got {}",
            signal.channels()
        )));
    }
    if !segment_len.is_power_of_two() || segment_len < 256 {
        return Err(Error::Config(format!(
            "segment length {segment_len} must be a power of two >= 256"
        )));
    }
    let out = resample_slice(signal.channel(0), eps.ratio(), segment_len);
    TimeSignal::mono(out, signal.sample_rate())
}

/// The overlap-save kernel behind [`apply_sro`]; `ratio` is the offset
/// as a plain fraction. Exposed for callers that work on raw slices.
///
/// Two consecutive real segments ride through one complex FFT (one in
/// the real part, one in the imaginary part); the two spectra are
/// unpacked by Hermitian symmetry, given their own fractional-shift
/// ramps, repacked and inverted together.
pub fn resample_slice(x: &[f64], ratio: f64, segment_len: usize) -> Vec<f64> {
    if x.is_empty() || ratio == 0.0 {
        return x.to_vec();
    }
    let seg = segment_len;
    // Retained hop per segment: short enough that the drift across it
    // stays far below a sample even at the +/-500 ppm bound. Forward
    // and inverse passes do not cancel, so each pass needs margin on
    // its own.
    let hop = (seg / 128).max(16);
    let margin = (seg - hop) / 2;
    let len = x.len();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(seg);
    let ifft = planner.plan_fft_inverse(seg);
    let scale = 1.0 / seg as f64;

    // fill one segment's block and return its fractional shift
    let load_block = |s: usize, target: &mut [Complex64], imag: bool| -> f64 {
        let out_start = s * hop;
        let center_out = out_start as f64 + (hop as f64 - 1.0) / 2.0;
        let shift = ratio * center_out;
        let int_shift = shift.round();
        let block_start = out_start as i64 - margin as i64 + int_shift as i64;
        for (m, v) in target.iter_mut().enumerate() {
            let idx = block_start + m as i64;
            let sample = if idx >= 0 && (idx as usize) < len { x[idx as usize] } else { 0.0 };
            if imag {
                v.im = sample;
            } else {
                v.re = sample;
            }
        }
        shift - int_shift
    };

    let n_segments = len.div_ceil(hop);
    let n_pairs = n_segments.div_ceil(2);
    let pieces = crate::parallel::map_indexed(n_pairs, |p| {
        let sa = 2 * p;
        let sb = sa + 1;
        let mut buf = vec![Complex64::default(); seg];
        let frac_a = load_block(sa, &mut buf, false);
        let frac_b = if sb < n_segments { load_block(sb, &mut buf, true) } else { 0.0 };
        fft.process(&mut buf);

        // unpack the two Hermitian spectra, rotate each by its own
        // fractional advance, repack
        let step_a = 2.0 * std::f64::consts::PI * frac_a / seg as f64;
        let step_b = 2.0 * std::f64::consts::PI * frac_b / seg as f64;
        let half = seg / 2;
        for k in 0..=half {
            let k2 = (seg - k) % seg;
            let z1 = buf[k];
            let z2 = buf[k2].conj();
            let a = 0.5 * (z1 + z2);
            let b = Complex64::new(0.0, -0.5) * (z1 - z2);
            let freq = k as f64;
            // At Nyquist the shift operator of a real signal projects to
            // its real part; anything else would leak between the two
            // packed segments.
            let (ra, rb) = if k == half {
                (
                    Complex64::new((step_a * freq).cos(), 0.0),
                    Complex64::new((step_b * freq).cos(), 0.0),
                )
            } else {
                (
                    Complex64::from_polar(1.0, step_a * freq),
                    Complex64::from_polar(1.0, step_b * freq),
                )
            };
            let ya = a * ra;
            let yb = b * rb;
            buf[k] = ya + Complex64::new(0.0, 1.0) * yb;
            if k2 != k {
                buf[k2] = ya.conj() + Complex64::new(0.0, 1.0) * yb.conj();
            }
        }
        ifft.process(&mut buf);

        let mut piece = Vec::with_capacity(2 * hop);
        let start_a = sa * hop;
        for i in 0..hop.min(len - start_a) {
            piece.push(buf[margin + i].re * scale);
        }
        if sb < n_segments {
            let start_b = sb * hop;
            for i in 0..hop.min(len - start_b) {
                piece.push(buf[margin + i].im * scale);
            }
        }
        piece
    });

    let mut out = Vec::with_capacity(len);
    for p in pieces {
        out.extend(p);
    }
    out
}

/// Rotates each playback frame by the conjugate ramp implied by the
/// running offset of the trace. The accumulator follows
/// `delta[l] = delta[l-1] + hop * eps[l]` and is anchored at the centre
/// of frame 0, so a constant trace compensates with zero mean timing
/// bias and a stepped trace never jumps.
pub fn compensate_sro(playback: &Spectrogram, trace: &SroTrace) -> Result<Spectrogram> {
    if playback.channels() != 1 {
        return Err(Error::Shape(format!(
            "compensate_sro expects one channel, got {}",
            playback.channels()
        )));
    }
    if trace.len() != playback.frames() {
        return Err(Error::Alignment(format!(
            "trace has {} frames, playback has {}",
            trace.len(),
            playback.frames()
        )));
    }
    let config = *playback.config();
    let nfft = config.fft_size as f64;
    let hop = config.hop_size as f64;
    let limit = drift_limit(&config);

    let mut out = playback.clone();
    let mut delta = 0.0; // accumulated offset, samples
    for l in 0..out.frames() {
        let eps = trace.smoothed_ppm(l) * 1e-6;
        if l == 0 {
            delta = config.frame_center(0) * eps;
        } else {
            delta += hop * eps;
        }
        if delta.abs() > limit {
            return Err(Error::ValidityViolated { frame: l, drift: delta, limit });
        }
        let step = -2.0 * std::f64::consts::PI * delta / nfft;
        let frame = out.frame_mut(0, l);
        for (k, v) in frame.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, step * k as f64);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::GaussianNoise;
    use crate::signal::snr_db;

    #[test]
    fn ppm_bound_is_enforced() {
        assert!(SroPpm::new(499.0).is_ok());
        assert!(matches!(SroPpm::new(501.0), Err(Error::SroOutOfRange { .. })));
        assert!(SroPpm::new(f64::NAN).is_err());
    }

    #[test]
    fn phase_term_trivial_cases() {
        let cfg = StftConfig::default();
        let one = sro_phase_term(0, 57, SroPpm::new(123.0).unwrap(), &cfg).unwrap();
        assert!((one - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let one = sro_phase_term(1000, 57, SroPpm::zero(), &cfg).unwrap();
        assert!((one - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let one = sro_phase_term(1000, 0, SroPpm::new(100.0).unwrap(), &cfg).unwrap();
        assert!((one - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn phase_term_matches_hand_evaluation() {
        // k = 2048, l = 100, hop 2048, fft 8192, eps = 100 ppm:
        // drift = 100 * 2048 * 1e-4 = 20.48 samples,
        // phase = -2*pi * 2048 * 20.48 / 8192.
        let cfg = StftConfig::default();
        let eps = SroPpm::new(100.0).unwrap();
        let v = sro_phase_term(2048, 100, eps, &cfg).unwrap();
        let drift = 100.0 * 2048.0 * 1e-4;
        let expected = Complex64::from_polar(
            1.0,
            -2.0 * std::f64::consts::PI * 2048.0 * drift / 8192.0,
        );
        assert!((v - expected).norm() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_term_rejects_excess_drift() {
        let cfg = StftConfig::default();
        let eps = SroPpm::new(500.0).unwrap();
        // drift = l * 2048 * 5e-4 > 2048  =>  l > 2000
        let r = sro_phase_term(100, 2100, eps, &cfg);
        match r {
            Err(Error::ValidityViolated { frame, .. }) => assert_eq!(frame, 2100),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ramp_composition_adds_phases() {
        let cfg = StftConfig::default();
        let e1 = SroPpm::new(30.0).unwrap();
        let e2 = SroPpm::new(-70.0).unwrap();
        let e12 = e1.combine(e2).unwrap();
        for (k, l) in [(1usize, 1usize), (100, 50), (4096, 200), (777, 333)] {
            let a = sro_phase_term(k, l, e1, &cfg).unwrap();
            let b = sro_phase_term(k, l, e2, &cfg).unwrap();
            let c = sro_phase_term(k, l, e12, &cfg).unwrap();
            // compare in phase arithmetic
            let d1 = drift_at_frame(l, e1, &cfg) + drift_at_frame(l, e2, &cfg);
            let d2 = drift_at_frame(l, e12, &cfg);
            assert!((d1 - d2).abs() < 1e-12);
            assert!(((a * b) - c).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_offset_is_identity() {
        let x = GaussianNoise::new(1).vec(40_000, 0.5);
        let sig = TimeSignal::mono(x.clone(), 16000.0).unwrap();
        let out = apply_sro(&sig, SroPpm::zero(), 8192).unwrap();
        assert_eq!(out.len(), x.len());
        for (a, b) in x.iter().zip(out.channel(0)) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_segment_and_channels() {
        let sig = TimeSignal::zeros(2, 1000, 16000.0);
        assert!(apply_sro(&sig, SroPpm::zero(), 8192).is_err());
        let sig = TimeSignal::zeros(1, 1000, 16000.0);
        assert!(apply_sro(&sig, SroPpm::zero(), 3000).is_err());
    }

    #[test]
    fn compensate_rejects_misaligned_trace() {
        let cfg = StftConfig { window_size: 2048, hop_size: 512, ..StftConfig::default() };
        let sig = TimeSignal::zeros(1, 20_000, 16000.0);
        let spec = crate::stft::stft(&sig, &StftConfig { fft_size: 2048, ..cfg }).unwrap();
        let trace = SroTrace::constant(spec.frames() + 3, 10.0, &cfg);
        assert!(matches!(compensate_sro(&spec, &trace), Err(Error::Alignment(_))));
    }

    #[test]
    fn zero_trace_leaves_playback_unchanged() {
        let cfg = StftConfig { window_size: 2048, hop_size: 512, fft_size: 2048, ..StftConfig::default() };
        let x = GaussianNoise::new(2).vec(30_000, 1.0);
        let spec =
            crate::stft::stft(&TimeSignal::mono(x, 16000.0).unwrap(), &cfg).unwrap();
        let trace = SroTrace::constant(spec.frames(), 0.0, &cfg);
        let out = compensate_sro(&spec, &trace).unwrap();
        for l in 0..spec.frames() {
            for k in 0..spec.bins() {
                assert_eq!(spec.at(0, l, k), out.at(0, l, k));
            }
        }
    }

    use crate::noise::bandlimited_noise;

    #[test]
    fn roundtrip_apply_then_inverse_apply() {
        // apply_sro(apply_sro(x, e), -e) ~ x at 100 ppm over 30 s noise.
        let fs = 16000.0;
        let x = bandlimited_noise(21, (30.0 * fs) as usize, 0.45);
        let sig = TimeSignal::mono(x.clone(), fs).unwrap();
        let eps = SroPpm::new(100.0).unwrap();
        let fwd = apply_sro(&sig, eps, 8192).unwrap();
        let back = apply_sro(&fwd, SroPpm::new(-100.0).unwrap(), 8192).unwrap();
        let snr = snr_db(&x, back.channel(0), 8192);
        assert!(snr >= 40.0, "roundtrip snr {snr} dB");
    }
}
