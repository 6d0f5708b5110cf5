use crate::error::{Error, Result};

/// Multi-channel sampled audio with a nominal sample rate.
///
/// All channels have the same length. The nominal rate is the rate the
/// samples claim to have; actual device clocks deviate from it by the
/// sample-rate offsets this crate simulates.
#[derive(Debug, Clone)]
pub struct TimeSignal {
    data: Vec<Vec<f64>>,
    sample_rate: f64,
}

impl TimeSignal {
    pub fn new(data: Vec<Vec<f64>>, sample_rate: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Shape("signal needs at least one channel".into()));
        }
        let len = data[0].len();
        if data.iter().any(|c| c.len() != len) {
            return Err(Error::Shape("channels differ in length".into()));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::Config(format!("sample rate {sample_rate} must be positive")));
        }
        Ok(Self { data, sample_rate })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn zeros(channels: usize, len: usize, sample_rate: f64) -> Self {
        Self { data: vec![vec![0.0; len]; channels], sample_rate }
    }

    pub fn channels(&self) -> usize {
        self.data.len()
    }

    pub fn len(&self) -> usize {
        self.data[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        &self.data[ch]
    }

    pub fn channel_mut(&mut self, ch: usize) -> &mut [f64] {
        &mut self.data[ch]
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.data
    }

    /// Root-mean-square of one channel.
    pub fn rms(&self, ch: usize) -> f64 {
        rms(&self.data[ch])
    }

    /// Fails on NaN or infinite samples, reporting the first offender.
    pub fn check_finite(&self) -> Result<()> {
        for (ch, samples) in self.data.iter().enumerate() {
            if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
                return Err(Error::NonFiniteInput { channel: ch, index });
            }
        }
        Ok(())
    }
}

pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt()
}

/// Signal-to-noise ratio in dB between a reference and a test signal,
/// ignoring `skip` samples at both ends.
pub fn snr_db(reference: &[f64], test: &[f64], skip: usize) -> f64 {
    let n = reference.len().min(test.len());
    assert!(n > 2 * skip, "snr window empty");
    let mut sig = 0.0;
    let mut err = 0.0;
    for i in skip..n - skip {
        sig += reference[i] * reference[i];
        let e = reference[i] - test[i];
        err += e * e;
    }
    if err == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (sig / err).log10()
}
