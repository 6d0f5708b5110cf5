use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Seeded Gaussian noise source.
///
/// Box–Muller over a ChaCha20 stream so that a given seed produces the
/// same samples on every platform, which the run manifests rely on.
pub struct GaussianNoise {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianNoise {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed), spare: None }
    }

    fn uniform(&mut self) -> f64 {
        // 53 random bits mapped into (0, 1]
        ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0)
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill(&mut self, out: &mut [f64], std_dev: f64) {
        for v in out {
            *v = std_dev * self.sample();
        }
    }

    pub fn vec(&mut self, len: usize, std_dev: f64) -> Vec<f64> {
        let mut out = vec![0.0; len];
        self.fill(&mut out, std_dev);
        out
    }
}

/// Seeded Gaussian noise band-limited below `cutoff` (cycles per
/// sample) with an FFT brick wall. Content in the top fraction of the
/// band cannot survive a resampling round trip (it aliases across
/// Nyquist), so fidelity measurements use this instead of full-band
/// noise.
pub fn bandlimited_noise(seed: u64, len: usize, cutoff: f64) -> Vec<f64> {
    use num_complex::Complex64;
    use rustfft::FftPlanner;

    let x = GaussianNoise::new(seed).vec(len, 1.0);
    let m = len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let ifft = planner.plan_fft_inverse(m);
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(m, Complex64::default());
    fft.process(&mut buf);
    for k in 0..m {
        let freq = k.min(m - k) as f64 / m as f64;
        if freq > cutoff {
            buf[k] = Complex64::default();
        }
    }
    ifft.process(&mut buf);
    buf[..len].iter().map(|c| c.re / m as f64).collect()
}
