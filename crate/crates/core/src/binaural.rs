//! Interaural coherence and ITD maps for listener-ear signal pairs.
//!
//! Ear signals pass through a bank of 24 gammatone-spaced bands
//! (4th-order complex resonator cascades on an ERB grid from 100 Hz to
//! 7.5 kHz). Per band and per 1 s block (50% overlap), the interaural
//! coherence is the magnitude of the normalized complex cross-PSD of
//! the band signals, and the ITD is the lag of the peak of the
//! normalized complex cross-correlation within +/-1 ms, refined to
//! sub-sample precision with a parabolic fit. Using the complex band
//! signals makes the correlation envelope single-peaked, which avoids
//! the cycle ambiguity a real-signal correlation has in narrow bands.

use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// ERB rate (Glasberg & Moore) in Cams.
fn erb_rate(hz: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * hz).log10()
}

fn erb_rate_inv(cams: f64) -> f64 {
    (10f64.powf(cams / 21.4) - 1.0) / 0.00437
}

/// Equivalent rectangular bandwidth at `hz`.
fn erb_bandwidth(hz: f64) -> f64 {
    24.7 * (4.37 * hz / 1000.0 + 1.0)
}

/// Gammatone-spaced band centers, inclusive of both edges.
pub fn erb_band_centers(count: usize, lo_hz: f64, hi_hz: f64) -> Vec<f64> {
    let lo = erb_rate(lo_hz);
    let hi = erb_rate(hi_hz);
    (0..count)
        .map(|i| erb_rate_inv(lo + (hi - lo) * i as f64 / (count - 1).max(1) as f64))
        .collect()
}

/// 4th-order gammatone band filter: four cascaded complex one-pole
/// resonators. The (complex) output is the analytic band signal.
struct GammatoneFilter {
    pole: Complex64,
    gain: f64,
    state: [Complex64; 4],
}

impl GammatoneFilter {
    fn new(center_hz: f64, sample_rate: f64) -> Self {
        let omega = 2.0 * std::f64::consts::PI * center_hz / sample_rate;
        let bw = 2.0 * std::f64::consts::PI * 1.019 * erb_bandwidth(center_hz) / sample_rate;
        let r = (-bw).exp();
        Self {
            pole: Complex64::from_polar(r, omega),
            gain: (1.0 - r).powi(4),
            state: [Complex64::default(); 4],
        }
    }

    /// Filters the analytic input; the output is the complex band
    /// signal. Feeding the analytic signal (no negative frequencies)
    /// keeps the top bands clean, where the resonator would otherwise
    /// pick up the negative-frequency image that sits right next to
    /// the pole near Nyquist.
    fn process(&mut self, input: &[Complex64], out: &mut Vec<Complex64>) {
        out.clear();
        out.reserve(input.len());
        for &x in input {
            let mut v = x * self.gain;
            for s in &mut self.state {
                *s = v + self.pole * *s;
                v = *s;
            }
            out.push(v);
        }
    }
}

/// Analytic signal via FFT: negative-frequency bins zeroed, positive
/// doubled.
fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    use rustfft::FftPlanner;
    let n = x.len();
    let m = n.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let ifft = planner.plan_fft_inverse(m);
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(m, Complex64::default());
    fft.process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || k == m / 2 {
            // leave as-is
        } else if k < m / 2 {
            *v *= 2.0;
        } else {
            *v = Complex64::default();
        }
    }
    ifft.process(&mut buf);
    let scale = 1.0 / m as f64;
    buf[..n].iter().map(|c| c * scale).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct CueMapConfig {
    pub band_count: usize,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    /// Analysis block length in seconds; blocks overlap by half.
    pub block_len_s: f64,
    /// ITD search window, seconds (physiological +/-1 ms).
    pub itd_window_s: f64,
    /// Normalized correlation-peak floor below which the ITD of a cell
    /// is flagged unreliable.
    pub reliability_floor: f64,
}

impl Default for CueMapConfig {
    fn default() -> Self {
        Self {
            band_count: 24,
            band_lo_hz: 100.0,
            band_hi_hz: 7500.0,
            block_len_s: 1.0,
            itd_window_s: 1e-3,
            reliability_floor: 0.1,
        }
    }
}

/// Band x block maps of interaural coherence and ITD. Undefined cells
/// (silent blocks) hold NaN and propagate through differences.
#[derive(Debug, Clone)]
pub struct CueMap {
    pub band_centers_hz: Vec<f64>,
    pub block_times_s: Vec<f64>,
    /// ic[band][block] in [0, 1], NaN when undefined.
    pub ic: Vec<Vec<f64>>,
    /// itd[band][block] in seconds, clamped to the search window.
    pub itd_s: Vec<Vec<f64>>,
    pub reliable: Vec<Vec<bool>>,
}

impl CueMap {
    pub fn bands(&self) -> usize {
        self.band_centers_hz.len()
    }

    pub fn blocks(&self) -> usize {
        self.block_times_s.len()
    }

    /// Mean |ic| over cells that are defined and reliable in both this
    /// map and the grid it came from.
    pub fn mean_abs_ic(&self) -> f64 {
        mean_abs(&self.ic, &self.reliable)
    }

    pub fn mean_abs_itd(&self) -> f64 {
        mean_abs(&self.itd_s, &self.reliable)
    }

    /// Restricts a summary to bands below `hz`.
    pub fn mean_abs_ic_below(&self, hz: f64) -> f64 {
        let keep: Vec<usize> =
            (0..self.bands()).filter(|&b| self.band_centers_hz[b] < hz).collect();
        let ic: Vec<Vec<f64>> = keep.iter().map(|&b| self.ic[b].clone()).collect();
        let rel: Vec<Vec<bool>> = keep.iter().map(|&b| self.reliable[b].clone()).collect();
        mean_abs(&ic, &rel)
    }

    pub fn mean_abs_ic_at_or_above(&self, hz: f64) -> f64 {
        let keep: Vec<usize> =
            (0..self.bands()).filter(|&b| self.band_centers_hz[b] >= hz).collect();
        let ic: Vec<Vec<f64>> = keep.iter().map(|&b| self.ic[b].clone()).collect();
        let rel: Vec<Vec<bool>> = keep.iter().map(|&b| self.reliable[b].clone()).collect();
        mean_abs(&ic, &rel)
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "band_hz,time_s,ic,itd_s,reliable")?;
        for b in 0..self.bands() {
            for t in 0..self.blocks() {
                writeln!(
                    f,
                    "{},{},{},{},{}",
                    self.band_centers_hz[b],
                    self.block_times_s[t],
                    self.ic[b][t],
                    self.itd_s[b][t],
                    u8::from(self.reliable[b][t])
                )?;
            }
        }
        Ok(())
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<CueMap> {
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut rows: Vec<(f64, f64, f64, f64, bool)> = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.starts_with("band_hz") || line.trim().is_empty() {
                continue;
            }
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 5 {
                return Err(Error::Parse(format!("cue row needs 5 columns: {line}")));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Parse(format!("bad number {s}")))
            };
            rows.push((num(c[0])?, num(c[1])?, num(c[2])?, num(c[3])?, c[4] == "1"));
        }
        let mut band_centers_hz: Vec<f64> = Vec::new();
        let mut block_times_s: Vec<f64> = Vec::new();
        for (b, t, ..) in &rows {
            if !band_centers_hz.contains(b) {
                band_centers_hz.push(*b);
            }
            if !block_times_s.contains(t) {
                block_times_s.push(*t);
            }
        }
        let bands = band_centers_hz.len();
        let blocks = block_times_s.len();
        if rows.len() != bands * blocks {
            return Err(Error::Parse("cue csv is not a full band x block grid".into()));
        }
        let mut map = CueMap {
            band_centers_hz,
            block_times_s,
            ic: vec![vec![f64::NAN; blocks]; bands],
            itd_s: vec![vec![f64::NAN; blocks]; bands],
            reliable: vec![vec![false; blocks]; bands],
        };
        for (b, t, ic, itd, rel) in rows {
            let bi = map.band_centers_hz.iter().position(|&v| v == b).unwrap();
            let ti = map.block_times_s.iter().position(|&v| v == t).unwrap();
            map.ic[bi][ti] = ic;
            map.itd_s[bi][ti] = itd;
            map.reliable[bi][ti] = rel;
        }
        Ok(map)
    }

    /// Gridded text: one row per band (first column the band center),
    /// one column per block; header comment carries the block times.
    pub fn write_grid<P: AsRef<Path>>(&self, path: P, which: CueField) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "# block_times_s:")?;
        for t in &self.block_times_s {
            write!(f, " {t}")?;
        }
        writeln!(f)?;
        for b in 0..self.bands() {
            write!(f, "{}", self.band_centers_hz[b])?;
            for t in 0..self.blocks() {
                let v = match which {
                    CueField::Ic => self.ic[b][t],
                    CueField::Itd => self.itd_s[b][t],
                };
                write!(f, " {v}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum CueField {
    Ic,
    Itd,
}

fn mean_abs(values: &[Vec<f64>], reliable: &[Vec<bool>]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (row, rel) in values.iter().zip(reliable) {
        for (v, r) in row.iter().zip(rel) {
            if *r && v.is_finite() {
                sum += v.abs();
                n += 1;
            }
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Computes IC and ITD maps for an ear-signal pair in one pass.
pub fn cue_map(left: &[f64], right: &[f64], sample_rate: f64, cfg: &CueMapConfig) -> Result<CueMap> {
    if left.len() != right.len() {
        return Err(Error::Shape(format!(
            "ear signals differ in length: {} vs {}",
            left.len(),
            right.len()
        )));
    }
    let block = (cfg.block_len_s * sample_rate).round() as usize;
    if left.len() < block {
        return Err(Error::InputTooShort { len: left.len(), min: block });
    }
    let hop = block / 2;
    let blocks = (left.len() - block) / hop + 1;
    let lag_window = (cfg.itd_window_s * sample_rate).round() as i64;

    let band_centers_hz = erb_band_centers(cfg.band_count, cfg.band_lo_hz, cfg.band_hi_hz);
    let block_times_s: Vec<f64> =
        (0..blocks).map(|t| (t * hop + block / 2) as f64 / sample_rate).collect();

    struct BandRow {
        ic: Vec<f64>,
        itd: Vec<f64>,
        reliable: Vec<bool>,
    }

    let analytic_l = analytic_signal(left);
    let analytic_r = analytic_signal(right);
    // Silence is judged on the raw input; the analytic transform has
    // global support and would smear energy into silent spans.
    let silent_block: Vec<bool> = (0..blocks)
        .map(|t| {
            let s = t * hop;
            let e = s + block;
            let el: f64 = left[s..e].iter().map(|v| v * v).sum();
            let er: f64 = right[s..e].iter().map(|v| v * v).sum();
            el <= block as f64 * 1e-30 || er <= block as f64 * 1e-30
        })
        .collect();

    let rows: Vec<BandRow> = crate::parallel::map_indexed(cfg.band_count, |b| {
        let mut filter_l = GammatoneFilter::new(band_centers_hz[b], sample_rate);
        let mut filter_r = GammatoneFilter::new(band_centers_hz[b], sample_rate);
        let mut zl = Vec::new();
        let mut zr = Vec::new();
        filter_l.process(&analytic_l, &mut zl);
        filter_r.process(&analytic_r, &mut zr);

        let mut row = BandRow {
            ic: vec![f64::NAN; blocks],
            itd: vec![f64::NAN; blocks],
            reliable: vec![false; blocks],
        };
        let omega_c = 2.0 * std::f64::consts::PI * band_centers_hz[b] / sample_rate;
        for t in 0..blocks {
            if silent_block[t] {
                continue; // cells stay NaN / unreliable
            }
            let s = t * hop;
            let e = s + block;
            let (ic, itd, rel) = block_cues(
                &zl[s..e],
                &zr[s..e],
                lag_window,
                omega_c,
                sample_rate,
                cfg.reliability_floor,
            );
            row.ic[t] = ic;
            row.itd[t] = itd;
            row.reliable[t] = rel;
        }
        row
    });

    let mut map = CueMap {
        band_centers_hz,
        block_times_s,
        ic: Vec::with_capacity(cfg.band_count),
        itd_s: Vec::with_capacity(cfg.band_count),
        reliable: Vec::with_capacity(cfg.band_count),
    };
    for row in rows {
        map.ic.push(row.ic);
        map.itd_s.push(row.itd);
        map.reliable.push(row.reliable);
    }
    Ok(map)
}

/// IC, ITD and reliability for one band-limited block.
///
/// The ITD comes from the normalized complex cross-correlation of the
/// analytic band signals: its magnitude (the envelope) picks the
/// carrier cycle without the cyclic ambiguity a real correlation has,
/// and the carrier phase at that lag supplies the sub-sample offset —
/// the analytic-correlator counterpart of parabolic peak refinement,
/// and exactly antisymmetric under channel swap.
fn block_cues(
    zl: &[Complex64],
    zr: &[Complex64],
    lag_window: i64,
    omega_c: f64,
    sample_rate: f64,
    reliability_floor: f64,
) -> (f64, f64, bool) {
    let n = zl.len();
    let energy_l: f64 = zl.iter().map(|v| v.norm_sqr()).sum();
    let energy_r: f64 = zr.iter().map(|v| v.norm_sqr()).sum();
    let silent = energy_l <= n as f64 * 1e-30 || energy_r <= n as f64 * 1e-30;
    if silent {
        return (f64::NAN, f64::NAN, false);
    }
    let denom = (energy_l * energy_r).sqrt();

    // zero-lag cross-PSD = interaural coherence
    let cross: Complex64 = zl.iter().zip(zr).map(|(l, r)| l * r.conj()).sum();
    let ic = (cross.norm() / denom).min(1.0);

    // prefix energies for per-lag normalization
    let mut pre_l = vec![0.0f64; n + 1];
    let mut pre_r = vec![0.0f64; n + 1];
    for t in 0..n {
        pre_l[t + 1] = pre_l[t] + zl[t].norm_sqr();
        pre_r[t + 1] = pre_r[t] + zr[t].norm_sqr();
    }

    // Normalized complex cross-correlation over +/-lag_window; positive
    // lag means the right channel arrives later.
    let lags = (2 * lag_window + 1) as usize;
    let mut rho = vec![Complex64::default(); lags];
    let mut magnitude = vec![0.0f64; lags];
    for i in 0..lags {
        let lag = i as i64 - lag_window;
        let t0 = (-lag).max(0) as usize;
        let t1 = (n as i64 - lag.max(0)) as usize;
        let mut acc = Complex64::default();
        for t in t0..t1 {
            acc += zl[t] * zr[(t as i64 + lag) as usize].conj();
        }
        let el = pre_l[t1] - pre_l[t0];
        let er = pre_r[(t1 as i64 + lag) as usize] - pre_r[(t0 as i64 + lag) as usize];
        let d = (el * er).sqrt();
        if d <= 1e-300 {
            continue;
        }
        rho[i] = acc / d;
        magnitude[i] = rho[i].norm();
    }
    let best = magnitude
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(lags / 2);
    let peak = magnitude[best];

    // envelope peak on the window boundary: the true delay has drifted
    // out of the search range, so the cell saturates and is flagged
    if best == 0 || best == lags - 1 {
        let window_s = lag_window as f64 / sample_rate;
        let itd = if best == 0 { -window_s } else { window_s };
        return (ic, itd, false);
    }

    // carrier-phase sub-sample refinement: arg rho(i) = -omega_c*(i - d),
    // so the delay estimate is i + arg/omega_c
    let mut lag = best as f64 - lag_window as f64;
    if peak > 0.0 && omega_c > 0.0 {
        lag += rho[best].arg() / omega_c;
    }
    let window_s = lag_window as f64 / sample_rate;
    let itd = (lag / sample_rate).clamp(-window_s, window_s);
    (ic, itd, peak >= reliability_floor)
}

/// IC part of the cue map; shares the band/block machinery of
/// [`cue_map`].
pub fn interaural_coherence_map(
    left: &[f64],
    right: &[f64],
    sample_rate: f64,
    cfg: &CueMapConfig,
) -> Result<CueMap> {
    cue_map(left, right, sample_rate, cfg)
}

/// ITD part of the cue map.
pub fn itd_map(left: &[f64], right: &[f64], sample_rate: f64, cfg: &CueMapConfig) -> Result<CueMap> {
    cue_map(left, right, sample_rate, cfg)
}

/// Element-wise difference of two maps on identical grids; undefined
/// cells propagate, reliability requires both inputs reliable.
pub fn cue_difference(map: &CueMap, reference: &CueMap) -> Result<CueMap> {
    if map.band_centers_hz != reference.band_centers_hz
        || map.block_times_s.len() != reference.block_times_s.len()
    {
        return Err(Error::Shape("cue maps on different band/block grids".into()));
    }
    let bands = map.bands();
    let blocks = map.blocks();
    let mut out = CueMap {
        band_centers_hz: map.band_centers_hz.clone(),
        block_times_s: map.block_times_s.clone(),
        ic: vec![vec![f64::NAN; blocks]; bands],
        itd_s: vec![vec![f64::NAN; blocks]; bands],
        reliable: vec![vec![false; blocks]; bands],
    };
    for b in 0..bands {
        for t in 0..blocks {
            out.ic[b][t] = map.ic[b][t] - reference.ic[b][t];
            out.itd_s[b][t] = map.itd_s[b][t] - reference.itd_s[b][t];
            out.reliable[b][t] = map.reliable[b][t] && reference.reliable[b][t];
        }
    }
    Ok(out)
}
