//! Seeded corruption processes applied to clean population traces.
//!
//! Every component draws from its own labeled stream, so changing one noise
//! source never perturbs the samples of another.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dyngen::Regime;
use crate::error::{Error, Result};

/// Deterministic random stream keyed by `(seed, label)`.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    label: String,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: u64, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"paraqnn.stream.v1");
        h.update(seed.to_le_bytes());
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        SeededRng {
            seed,
            label: label.to_owned(),
            inner: ChaCha20Rng::from_seed(key),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// A child stream, e.g. `derive("epoch-3")` of stream "shuffle".
    pub fn derive(&self, sublabel: &str) -> SeededRng {
        SeededRng::new(self.seed, &format!("{}/{}", self.label, sublabel))
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Magnitudes of the composite noise floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseStack {
    pub gaussian_sigma: f64,
    pub telegraph_amplitude: f64,
    /// Per-sample flip probability of the telegraph sign.
    pub telegraph_switch_prob: f64,
    pub pink_sigma: f64,
    pub spam_epsilon: f64,
    #[serde(default)]
    pub clip_output: bool,
}

impl Default for NoiseStack {
    fn default() -> Self {
        Self::none()
    }
}

impl NoiseStack {
    pub const fn none() -> Self {
        NoiseStack {
            gaussian_sigma: 0.0,
            telegraph_amplitude: 0.0,
            telegraph_switch_prob: 0.0,
            pink_sigma: 0.0,
            spam_epsilon: 0.0,
            clip_output: false,
        }
    }

    pub fn for_regime(regime: Regime) -> Self {
        match regime {
            Regime::Rabi | Regime::Lindblad => NoiseStack {
                gaussian_sigma: 0.08,
                telegraph_amplitude: 0.1,
                telegraph_switch_prob: 0.02,
                ..Self::none()
            },
            Regime::Mixed => NoiseStack {
                pink_sigma: 0.06,
                spam_epsilon: 0.02,
                ..Self::none()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mags = [
            ("gaussian_sigma", self.gaussian_sigma),
            ("telegraph_amplitude", self.telegraph_amplitude),
            ("pink_sigma", self.pink_sigma),
        ];
        for (name, v) in mags {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.telegraph_switch_prob) {
            return Err(Error::InvalidConfig(format!(
                "telegraph_switch_prob must lie in [0, 1], got {}",
                self.telegraph_switch_prob
            )));
        }
        if !(0.0..0.5).contains(&self.spam_epsilon) {
            return Err(Error::InvalidConfig(format!(
                "spam_epsilon must lie in [0, 0.5), got {}",
                self.spam_epsilon
            )));
        }
        Ok(())
    }
}

pub fn gaussian_noise(rng: &mut SeededRng, n: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Two-state Markov chain over `{+a, −a}` with a fair-coin initial sign.
pub fn telegraph_noise(rng: &mut SeededRng, n: usize, amplitude: f64, switch_prob: f64) -> Vec<f64> {
    if amplitude == 0.0 || n == 0 {
        return vec![0.0; n];
    }
    let mut sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let mut out = Vec::with_capacity(n);
    out.push(sign * amplitude);
    for _ in 1..n {
        if rng.random::<f64>() < switch_prob {
            sign = -sign;
        }
        out.push(sign * amplitude);
    }
    out
}

/// 1/f noise by spectral shaping of white Gaussian noise.
///
/// The result has zero mean and population standard deviation exactly
/// `sigma` (up to rounding).
pub fn pink_noise(rng: &mut SeededRng, n: usize, sigma: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "pink noise needs at least 2 samples, got {n}"
        )));
    }
    if sigma == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    for (k, c) in buf.iter_mut().enumerate().skip(1) {
        // mirror index keeps the spectrum Hermitian
        let f = k.min(n - k) as f64;
        *c /= f.sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);

    let mut out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = out.iter().sum::<f64>() / n as f64;
    out.iter_mut().for_each(|v| *v -= mean);
    let sd = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if sd > 0.0 {
        let scale = sigma / sd;
        out.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(out)
}

/// Symmetric readout confusion: each outcome is misassigned with probability
/// `epsilon`.
#[inline]
pub fn apply_spam(p: f64, epsilon: f64) -> f64 {
    epsilon + (1.0 - 2.0 * epsilon) * p
}

/// `spam(clean) + gaussian + telegraph + pink`, optionally clamped to [0, 1].
pub fn corrupt(clean: &[f64], stack: &NoiseStack, seed: u64) -> Result<Vec<f64>> {
    stack.validate()?;
    let n = clean.len();
    let mut y: Vec<f64> = clean
        .iter()
        .map(|&p| apply_spam(p, stack.spam_epsilon))
        .collect();

    let add = |y: &mut [f64], noise: Vec<f64>| {
        y.iter_mut().zip(noise).for_each(|(v, e)| *v += e);
    };
    if stack.gaussian_sigma > 0.0 {
        let mut rng = SeededRng::new(seed, "gaussian");
        add(&mut y, gaussian_noise(&mut rng, n, stack.gaussian_sigma));
    }
    if stack.telegraph_amplitude > 0.0 {
        let mut rng = SeededRng::new(seed, "telegraph");
        add(
            &mut y,
            telegraph_noise(
                &mut rng,
                n,
                stack.telegraph_amplitude,
                stack.telegraph_switch_prob,
            ),
        );
    }
    if stack.pink_sigma > 0.0 {
        let mut rng = SeededRng::new(seed, "pink");
        add(&mut y, pink_noise(&mut rng, n, stack.pink_sigma)?);
    }
    if stack.clip_output {
        y.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }
    Ok(y)
}
