//! Oracle relative-transfer-function estimation and LCMV beamforming.
//!
//! RTFs are estimated once, during an initialization phase in which a
//! single loudspeaker is active: per bin, the microphone/playback
//! cross-PSD vector is averaged over active frames and normalized by
//! its reference-microphone entry. The common per-bin factors (playback
//! spectrum, clock-drift phase ramp) cancel in that ratio, which is why
//! the estimate survives uncompensated sample-rate offsets.
//!
//! The beamformer pointing at loudspeaker `q` solves the distortionless
//! /null constraint pair with identity noise covariance and diagonal
//! loading: `w_q = A (A^H A + alpha I)^{-1} g_q`, with the 2x2 inverse
//! in closed form.

use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::dwacd::{frame_energy, ActivityDetector};
use crate::error::{Error, Result};
use crate::stft::Spectrogram;

/// One RTF column: per-bin M-vector with the reference entry pinned to
/// one. Bins whose reference cross-PSD fell below the floor are flagged
/// degenerate and carry an all-ones vector.
#[derive(Debug, Clone)]
pub struct RtfColumn {
    values: Vec<Complex64>,
    degenerate: Vec<bool>,
    bins: usize,
    mics: usize,
}

impl RtfColumn {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn mics(&self) -> usize {
        self.mics
    }

    pub fn at(&self, bin: usize, mic: usize) -> Complex64 {
        self.values[bin * self.mics + mic]
    }

    pub fn bin(&self, bin: usize) -> &[Complex64] {
        &self.values[bin * self.mics..(bin + 1) * self.mics]
    }

    pub fn is_degenerate(&self, bin: usize) -> bool {
        self.degenerate[bin]
    }

    /// Writes the documented text table: one `bin mic re im` row per
    /// entry, `#`-prefixed header.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# rtf column: bin mic re im (degenerate bins marked with d)")?;
        writeln!(f, "# bins={} mics={}", self.bins, self.mics)?;
        for k in 0..self.bins {
            for m in 0..self.mics {
                let v = self.at(k, m);
                let tag = if self.degenerate[k] { " d" } else { "" };
                writeln!(f, "{k} {m} {} {}{tag}", v.re, v.im)?;
            }
        }
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut bins = 0usize;
        let mut mics = 0usize;
        let mut entries = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if let Some(meta) = line.strip_prefix('#') {
                for tok in meta.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("bins=") {
                        bins = v.parse().map_err(|_| Error::Parse(format!("bins={v}")))?;
                    } else if let Some(v) = tok.strip_prefix("mics=") {
                        mics = v.parse().map_err(|_| Error::Parse(format!("mics={v}")))?;
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() < 4 {
                return Err(Error::Parse(format!("rtf row needs bin mic re im: {line}")));
            }
            let k: usize = cols[0].parse().map_err(|_| Error::Parse(line.clone()))?;
            let m: usize = cols[1].parse().map_err(|_| Error::Parse(line.clone()))?;
            let re: f64 = cols[2].parse().map_err(|_| Error::Parse(line.clone()))?;
            let im: f64 = cols[3].parse().map_err(|_| Error::Parse(line.clone()))?;
            let d = cols.len() > 4 && cols[4] == "d";
            entries.push((k, m, Complex64::new(re, im), d));
        }
        if bins == 0 || mics == 0 {
            return Err(Error::Parse("rtf table missing bins=/mics= header".into()));
        }
        let mut values = vec![Complex64::default(); bins * mics];
        let mut degenerate = vec![false; bins];
        for (k, m, v, d) in entries {
            if k >= bins || m >= mics {
                return Err(Error::Parse(format!("rtf entry ({k},{m}) out of range")));
            }
            values[k * mics + m] = v;
            degenerate[k] |= d;
        }
        Ok(Self { values, degenerate, bins, mics })
    }
}

/// RTF matrix A[k] = [a_1, a_2] with microphone 0 as reference.
#[derive(Debug, Clone)]
pub struct RtfMatrix {
    pub columns: [RtfColumn; 2],
}

impl RtfMatrix {
    pub fn new(columns: [RtfColumn; 2]) -> Result<Self> {
        let (a, b) = (&columns[0], &columns[1]);
        if a.bins != b.bins || a.mics != b.mics {
            return Err(Error::Shape("rtf columns disagree in shape".into()));
        }
        Ok(Self { columns })
    }

    pub fn bins(&self) -> usize {
        self.columns[0].bins
    }

    pub fn mics(&self) -> usize {
        self.columns[0].mics
    }

    pub fn is_degenerate(&self, bin: usize) -> bool {
        self.columns[0].is_degenerate(bin) || self.columns[1].is_degenerate(bin)
    }
}

const REFERENCE_PSD_FLOOR: f64 = 1e-12;

/// Estimates one oracle RTF column from a solo-activity recording.
///
/// `solo_mics` holds the M microphone channels captured while only the
/// target loudspeaker was active; `playback` is the corresponding
/// playback spectrogram used both as the cross-PSD reference and for
/// activity gating.
pub fn estimate_oracle_rtf(
    solo_mics: &Spectrogram,
    playback: &Spectrogram,
    activity: &ActivityDetector,
) -> Result<RtfColumn> {
    if playback.channels() != 1 {
        return Err(Error::Shape("playback reference must be single-channel".into()));
    }
    if solo_mics.frames() != playback.frames() || solo_mics.bins() != playback.bins() {
        return Err(Error::Shape(format!(
            "solo recording {}x{} not aligned with playback {}x{}",
            solo_mics.frames(),
            solo_mics.bins(),
            playback.frames(),
            playback.bins()
        )));
    }
    let mics = solo_mics.channels();
    let bins = solo_mics.bins();

    let mut acc = vec![Complex64::default(); bins * mics];
    let mut detector = activity.clone();
    let mut used = 0usize;
    for l in 0..playback.frames() {
        let x = playback.frame(0, l);
        if !detector.detect(frame_energy(x)) {
            continue;
        }
        used += 1;
        for m in 0..mics {
            let z = solo_mics.frame(m, l);
            for k in 0..bins {
                acc[k * mics + m] += z[k] * x[k].conj();
            }
        }
    }
    if used == 0 {
        return Err(Error::InputTooShort { len: 0, min: 1 });
    }

    let mut values = vec![Complex64::default(); bins * mics];
    let mut degenerate = vec![false; bins];
    let scale = 1.0 / used as f64;
    for k in 0..bins {
        let reference = acc[k * mics] * scale;
        if reference.norm() < REFERENCE_PSD_FLOOR {
            degenerate[k] = true;
            for m in 0..mics {
                values[k * mics + m] = Complex64::new(1.0, 0.0);
            }
            continue;
        }
        for m in 0..mics {
            values[k * mics + m] = acc[k * mics + m] * scale / reference;
        }
        values[k * mics] = Complex64::new(1.0, 0.0);
    }
    Ok(RtfColumn { values, degenerate, bins, mics })
}

/// Per-bin LCMV weights for one target loudspeaker.
#[derive(Debug, Clone)]
pub struct BeamformerWeights {
    weights: Vec<Complex64>,
    bins: usize,
    mics: usize,
    pub target: usize,
    pub diagonal_loading: f64,
    /// Bins where the RTF was degenerate and the weights fall back to a
    /// reference-microphone selector.
    passthrough: Vec<bool>,
}

impl BeamformerWeights {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn mics(&self) -> usize {
        self.mics
    }

    pub fn bin(&self, k: usize) -> &[Complex64] {
        &self.weights[k * self.mics..(k + 1) * self.mics]
    }

    pub fn is_passthrough(&self, k: usize) -> bool {
        self.passthrough[k]
    }

    /// Per-bin constraint residual `max_q' |w^H a_q' - g[q']|` against
    /// the matrix the weights were built from. Degenerate bins are
    /// reported as-is, never hidden.
    pub fn constraint_residual(&self, rtf: &RtfMatrix) -> Vec<f64> {
        (0..self.bins)
            .map(|k| {
                let w = self.bin(k);
                let mut worst = 0.0f64;
                for (q, col) in rtf.columns.iter().enumerate() {
                    let a = col.bin(k);
                    let mut dot = Complex64::default();
                    for m in 0..self.mics {
                        dot += w[m].conj() * a[m];
                    }
                    let g = if q == self.target { 1.0 } else { 0.0 };
                    worst = worst.max((dot - g).norm());
                }
                worst
            })
            .collect()
    }
}

/// `w_q[k] = A [A^H A + alpha I]^{-1} g_q` per bin.
pub fn lcmv_weights(rtf: &RtfMatrix, target: usize, alpha: f64) -> Result<BeamformerWeights> {
    if target > 1 {
        return Err(Error::Config(format!("target index {target} out of range")));
    }
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("diagonal loading {alpha} must be positive")));
    }
    let bins = rtf.bins();
    let mics = rtf.mics();
    for col in &rtf.columns {
        if let Some(bad) = col.values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite rtf entry at bin {}, mic {}",
                bad / mics,
                bad % mics
            )));
        }
    }

    let mut weights = vec![Complex64::default(); bins * mics];
    let mut passthrough = vec![false; bins];
    for k in 0..bins {
        let w = &mut weights[k * mics..(k + 1) * mics];
        if rtf.is_degenerate(k) {
            w[0] = Complex64::new(1.0, 0.0);
            passthrough[k] = true;
            continue;
        }
        let a0 = rtf.columns[0].bin(k);
        let a1 = rtf.columns[1].bin(k);
        // G = A^H A + alpha I, Hermitian 2x2
        let mut g00 = alpha;
        let mut g11 = alpha;
        let mut g01 = Complex64::default();
        for m in 0..mics {
            g00 += a0[m].norm_sqr();
            g11 += a1[m].norm_sqr();
            g01 += a0[m].conj() * a1[m];
        }
        let det = g00 * g11 - g01.norm_sqr();
        // det >= alpha * (g00 + g11) - alpha^2 > 0 by loading
        let inv_col = if target == 0 {
            // first column of G^{-1}
            (Complex64::new(g11 / det, 0.0), -g01.conj() / det)
        } else {
            (-g01 / det, Complex64::new(g00 / det, 0.0))
        };
        for m in 0..mics {
            w[m] = a0[m] * inv_col.0 + a1[m] * inv_col.1;
        }
    }
    Ok(BeamformerWeights { weights, bins, mics, target, diagonal_loading: alpha, passthrough })
}

/// `Z_q[k, l] = w_q^H[k] y[k, l]`.
pub fn beamform(weights: &BeamformerWeights, mics: &Spectrogram) -> Result<Spectrogram> {
    if mics.channels() != weights.mics {
        return Err(Error::Shape(format!(
            "{} microphone channels vs {} weight entries",
            mics.channels(),
            weights.mics
        )));
    }
    if mics.bins() != weights.bins {
        return Err(Error::Shape(format!(
            "{} bins vs {} weight bins",
            mics.bins(),
            weights.bins
        )));
    }
    let mut out = Spectrogram::zeros_like_signal(*mics.config(), 1, mics.source_len());
    debug_assert_eq!(out.frames(), mics.frames());
    for l in 0..mics.frames() {
        for k in 0..mics.bins() {
            let w = weights.bin(k);
            let mut acc = Complex64::default();
            for m in 0..mics.channels() {
                acc += w[m].conj() * mics.at(m, l, k);
            }
            out.frame_mut(0, l)[k] = acc;
        }
    }
    Ok(out)
}
