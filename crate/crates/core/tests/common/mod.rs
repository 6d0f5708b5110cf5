//! Independent oracles shared by the integration tests. Everything in
//! here is deliberately naive: straight-line implementations that are
//! easy to audit, kept apart from the code paths they check.
#![allow(dead_code, unused_imports)]

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 1..48 {
        let f = x / (2.0 * k as f64);
        term *= f * f;
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

pub fn kaiser_window(taps: usize, beta: f64) -> Vec<f64> {
    let denom = bessel_i0(beta);
    (0..taps)
        .map(|i| {
            let u = 2.0 * i as f64 / (taps - 1) as f64 - 1.0;
            bessel_i0(beta * (1.0 - u * u).sqrt()) / denom
        })
        .collect()
}

/// Time-domain windowed-sinc resampling oracle: y[n] = x((1 + ratio) n)
/// with a 64-tap Kaiser-windowed interpolator.
pub fn sinc_resample(x: &[f64], ratio: f64) -> Vec<f64> {
    let taps = 64usize;
    let half = (taps / 2) as i64;
    let win = kaiser_window(taps, 8.0);
    (0..x.len())
        .map(|n| {
            let pos = (1.0 + ratio) * n as f64;
            let base = pos.floor() as i64;
            let frac = pos - base as f64;
            let mut acc = 0.0;
            for (t, w) in win.iter().enumerate() {
                let idx = base + t as i64 - half + 1;
                if idx >= 0 && (idx as usize) < x.len() {
                    let u = t as f64 - half as f64 + 1.0 - frac;
                    let s = if u.abs() < 1e-12 {
                        1.0
                    } else {
                        (std::f64::consts::PI * u).sin() / (std::f64::consts::PI * u)
                    };
                    acc += x[idx as usize] * s * w;
                }
            }
            acc
        })
        .collect()
}

/// Mean frequency of a near-sinusoidal signal from linearly
/// interpolated zero-crossing times of the interior span.
pub fn zero_crossing_frequency(x: &[f64], sample_rate: f64, skip: usize) -> f64 {
    let mut first: Option<f64> = None;
    let mut last = 0.0;
    let mut count = 0usize;
    for i in skip..x.len() - skip - 1 {
        if x[i] <= 0.0 && x[i + 1] > 0.0 {
            let t = i as f64 + x[i].abs() / (x[i + 1] - x[i]);
            if first.is_none() {
                first = Some(t);
            }
            last = t;
            count += 1;
        }
    }
    assert!(count > 2, "not enough zero crossings");
    (count - 1) as f64 * sample_rate / (last - first.unwrap())
}

/// Sub-sample delay of `probe` relative to `reference` over one block,
/// via integer cross-correlation plus parabolic refinement.
pub fn block_delay(reference: &[f64], probe: &[f64], max_lag: i64) -> f64 {
    let n = reference.len().min(probe.len());
    let mut best = (f64::MIN, 0i64);
    let mut values = std::collections::HashMap::new();
    let corr_at = |lag: i64, values: &mut std::collections::HashMap<i64, f64>| -> f64 {
        *values.entry(lag).or_insert_with(|| {
            let mut acc = 0.0;
            for t in 0..n as i64 {
                let u = t + lag;
                if u >= 0 && u < n as i64 {
                    acc += reference[t as usize] * probe[u as usize];
                }
            }
            acc
        })
    };
    for lag in -max_lag..=max_lag {
        let v = corr_at(lag, &mut values);
        if v > best.0 {
            best = (v, lag);
        }
    }
    let (_, lag) = best;
    let y0 = corr_at(lag - 1, &mut values);
    let y1 = corr_at(lag, &mut values);
    let y2 = corr_at(lag + 1, &mut values);
    let denom = y0 - 2.0 * y1 + y2;
    let delta = if denom.abs() > 1e-12 { (0.5 * (y0 - y2) / denom).clamp(-1.0, 1.0) } else { 0.0 };
    // positive result = probe arrives later than reference
    lag as f64 + delta
}

pub use srosync::noise::bandlimited_noise;

/// Direct time-domain convolution, the oracle for the FFT fast path.
pub fn convolve_direct(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (j, &hj) in h.iter().enumerate() {
            out[i + j] += xi * hj;
        }
    }
    out
}
