//! ARMA(X) signal generation and spectral quantities.
//!
//! Ambient grid measurements are modeled as `x = (C/A) e` with `e` seeded
//! Gaussian white noise; a forced oscillation enters as a windowed cosine
//! `u` filtered through `B/A`, so the observed record is `y = x + (B/A) u`.
//! All signal values are in mHz, frequencies in Hz.

use num_complex::Complex64;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Samples discarded at the start of every ambient simulation so the
/// filter state is effectively stationary when the record begins.
pub const AMBIENT_WARMUP: usize = 2000;

/// A real-valued measurement record sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub label: String,
}

impl SignalRecord {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, label: impl Into<String>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::ShortRecord {
                len: samples.len(),
                min: 2,
            });
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::InvalidParam(format!(
                "sample_rate_hz must be > 0, got {sample_rate_hz}"
            )));
        }
        if let Some(bad) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample(bad));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn nyquist_hz(&self) -> f64 {
        0.5 * self.sample_rate_hz
    }

    /// Copy of the samples in `range` as a new record (same rate).
    pub fn slice(&self, range: std::ops::Range<usize>, label: impl Into<String>) -> Result<Self> {
        SignalRecord::new(self.samples[range].to_vec(), self.sample_rate_hz, label)
    }
}

/// A sinusoidal disturbance active on the inclusive sample span
/// `[start_sample, end_sample]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcedOscillation {
    /// Amplitude in mHz (of the *input* `u`; the observed amplitude is
    /// scaled by the model's input frequency response).
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub phase_rad: f64,
    pub start_sample: usize,
    pub end_sample: usize,
}

impl ForcedOscillation {
    pub fn validate(&self, n_samples: usize, sample_rate_hz: f64) -> Result<()> {
        if self.amplitude < 0.0 {
            return Err(Error::InvalidParam(format!(
                "amplitude must be >= 0, got {}",
                self.amplitude
            )));
        }
        check_in_band(self.frequency_hz, sample_rate_hz)?;
        if self.start_sample > self.end_sample || self.end_sample >= n_samples {
            return Err(Error::InvalidParam(format!(
                "oscillation span [{}, {}] outside record of length {n_samples}",
                self.start_sample, self.end_sample
            )));
        }
        Ok(())
    }

    pub fn duration_samples(&self) -> usize {
        self.end_sample - self.start_sample + 1
    }
}

/// ARMA(X) process description: `A(q) y = C(q) e + B(q) u` with monic
/// `A` and `C` in the delay operator `q^-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmaModel {
    ar_coeffs: Vec<f64>,
    ma_coeffs: Vec<f64>,
    x_coeffs: Vec<f64>,
    pub noise_variance: f64,
    pub sample_rate_hz: f64,
}

impl ArmaModel {
    pub fn new(
        ar_coeffs: Vec<f64>,
        ma_coeffs: Vec<f64>,
        x_coeffs: Vec<f64>,
        noise_variance: f64,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        for (name, p) in [("A", &ar_coeffs), ("C", &ma_coeffs)] {
            match p.first() {
                Some(&1.0) => {}
                Some(&c0) => return Err(Error::NotMonic(c0)),
                None => {
                    return Err(Error::InvalidParam(format!("{name}(q) must be non-empty")))
                }
            }
        }
        if x_coeffs.is_empty() {
            return Err(Error::InvalidParam("B(q) must be non-empty".into()));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::InvalidParam(format!(
                "sample_rate_hz must be > 0, got {sample_rate_hz}"
            )));
        }
        if !(noise_variance >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "noise_variance must be >= 0, got {noise_variance}"
            )));
        }
        check_ar_stability(&ar_coeffs)?;
        Ok(Self {
            ar_coeffs,
            ma_coeffs,
            x_coeffs,
            noise_variance,
            sample_rate_hz,
        })
    }

    pub fn ar_coeffs(&self) -> &[f64] {
        &self.ar_coeffs
    }

    pub fn ma_coeffs(&self) -> &[f64] {
        &self.ma_coeffs
    }

    pub fn x_coeffs(&self) -> &[f64] {
        &self.x_coeffs
    }

    pub fn nyquist_hz(&self) -> f64 {
        0.5 * self.sample_rate_hz
    }

    /// `C(e^{jw})/A(e^{jw})` at frequency `freq_hz`: the noise path response.
    pub fn noise_transfer(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / self.sample_rate_hz;
        eval_poly(&self.ma_coeffs, w) / eval_poly(&self.ar_coeffs, w)
    }

    /// `B(e^{jw})/A(e^{jw})` at frequency `freq_hz`: the input (FO) path response.
    pub fn input_transfer(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / self.sample_rate_hz;
        eval_poly(&self.x_coeffs, w) / eval_poly(&self.ar_coeffs, w)
    }
}

/// Evaluate a delay-operator polynomial `p0 + p1 q^-1 + ...` at `q = e^{jw}`.
fn eval_poly(coeffs: &[f64], w: f64) -> Complex64 {
    let step = Complex64::from_polar(1.0, -w);
    let mut z = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        acc += c * z;
        z *= step;
    }
    acc
}

fn check_in_band(freq_hz: f64, sample_rate_hz: f64) -> Result<()> {
    let nyquist = 0.5 * sample_rate_hz;
    if !(freq_hz > 0.0 && freq_hz < nyquist) {
        return Err(Error::OutOfBand {
            freq_hz,
            nyquist_hz: nyquist,
        });
    }
    Ok(())
}

/// Schur-Cohn stability test: all reflection coefficients of the AR
/// polynomial must have magnitude < 1, which is equivalent to all roots
/// lying strictly inside the unit circle.
fn check_ar_stability(ar: &[f64]) -> Result<()> {
    let mut a: Vec<f64> = ar.to_vec();
    while a.len() > 1 {
        let k = *a.last().unwrap();
        if !(k.abs() < 1.0) || !k.is_finite() {
            return Err(Error::UnstableModel(k.abs()));
        }
        let m = a.len() - 1;
        let denom = 1.0 - k * k;
        let prev = a.clone();
        a.truncate(m);
        for i in 1..m {
            a[i] = (prev[i] - k * prev[m - i]) / denom;
        }
    }
    Ok(())
}

/// Seeded standard-normal generator: ChaCha8 uniforms through the
/// Box-Muller transform. Bit-reproducible for a fixed seed.
pub struct GaussianNoise {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianNoise {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn uniform_open(&mut self) -> f64 {
        // (0, 1): 53 mantissa bits, offset by half an ulp to exclude 0.
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open();
        let u2 = self.uniform_open();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Filter `input` through `num(q)/den(q)` (den monic) with zero initial state.
fn filter_rational(num: &[f64], den: &[f64], input: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; input.len()];
    for k in 0..input.len() {
        let mut acc = 0.0;
        for (j, &b) in num.iter().enumerate() {
            if k >= j {
                acc += b * input[k - j];
            }
        }
        for (i, &a) in den.iter().enumerate().skip(1) {
            if k >= i {
                acc -= a * out[k - i];
            }
        }
        out[k] = acc;
    }
    out
}

/// Place a conjugate pole pair from a continuous-time second-order mode at
/// `mode_freq_hz` with relative damping `damping_ratio`, discretized at
/// `sample_rate_hz`. Returns an AR(2) model with `C(q) = B(q) = 1`.
pub fn design_resonant_arma(
    mode_freq_hz: f64,
    damping_ratio: f64,
    sample_rate_hz: f64,
    noise_variance: f64,
) -> Result<ArmaModel> {
    if !(damping_ratio > 0.0 && damping_ratio < 1.0) {
        return Err(Error::InvalidParam(format!(
            "damping_ratio must be in (0, 1), got {damping_ratio}"
        )));
    }
    check_in_band(mode_freq_hz, sample_rate_hz)?;
    let wn = 2.0 * std::f64::consts::PI * mode_freq_hz;
    let t = 1.0 / sample_rate_hz;
    // z = exp(sT), s = -zeta*wn +/- j*wn*sqrt(1 - zeta^2)
    let radius = (-damping_ratio * wn * t).exp();
    let angle = wn * (1.0 - damping_ratio * damping_ratio).sqrt() * t;
    let ar = vec![1.0, -2.0 * radius * angle.cos(), radius * radius];
    ArmaModel::new(ar, vec![1.0], vec![1.0], noise_variance, sample_rate_hz)
}

/// Ambient record `x = (C/A) e` driven by seeded white noise; the first
/// [`AMBIENT_WARMUP`] filtered samples are discarded.
pub fn simulate_ambient(model: &ArmaModel, n_samples: usize, seed: u64) -> Result<SignalRecord> {
    if n_samples < 2 {
        return Err(Error::ShortRecord {
            len: n_samples,
            min: 2,
        });
    }
    let mut noise = GaussianNoise::new(seed);
    let sigma = model.noise_variance.sqrt();
    let total = n_samples + AMBIENT_WARMUP;
    let e: Vec<f64> = (0..total).map(|_| sigma * noise.next_standard()).collect();
    let filtered = filter_rational(model.ma_coeffs(), model.ar_coeffs(), &e);
    SignalRecord::new(
        filtered[AMBIENT_WARMUP..].to_vec(),
        model.sample_rate_hz,
        format!("ambient seed={seed}"),
    )
}

/// The raw FO input `u[k] = A cos(2 pi f k / f_s + theta)` on its span,
/// zero elsewhere.
pub fn make_fo_input(
    fo: &ForcedOscillation,
    n_samples: usize,
    sample_rate_hz: f64,
) -> Result<SignalRecord> {
    fo.validate(n_samples, sample_rate_hz)?;
    let w = 2.0 * std::f64::consts::PI * fo.frequency_hz / sample_rate_hz;
    let samples: Vec<f64> = (0..n_samples)
        .map(|k| {
            if k >= fo.start_sample && k <= fo.end_sample {
                fo.amplitude * (w * k as f64 + fo.phase_rad).cos()
            } else {
                0.0
            }
        })
        .collect();
    SignalRecord::new(samples, sample_rate_hz, "fo input")
}

/// Full observed output `y = (C/A) e + (B/A) u`, sharing the noise path of
/// [`simulate_ambient`] for the same seed. The FO contribution carries the
/// natural on/off transients because `u` passes through the system filter.
pub fn simulate_armax(
    model: &ArmaModel,
    fo: &ForcedOscillation,
    n_samples: usize,
    seed: u64,
) -> Result<SignalRecord> {
    let ambient = simulate_ambient(model, n_samples, seed)?;
    let u = make_fo_input(fo, n_samples, model.sample_rate_hz)?;
    let response = filter_rational(model.x_coeffs(), model.ar_coeffs(), &u.samples);
    let samples: Vec<f64> = ambient
        .samples
        .iter()
        .zip(&response)
        .map(|(x, s)| x + s)
        .collect();
    SignalRecord::new(
        samples,
        model.sample_rate_hz,
        format!("armax seed={seed}"),
    )
}

/// One-sided power spectral density of the ambient process at `freq_hz`,
/// in mHz^2/Hz: `Phi_x(f) = 2 (sigma^2 / f_s) |C/A|^2`.
pub fn psd_at(model: &ArmaModel, freq_hz: f64) -> Result<f64> {
    check_in_band(freq_hz, model.sample_rate_hz)?;
    let h = model.noise_transfer(freq_hz);
    Ok(2.0 * model.noise_variance / model.sample_rate_hz * h.norm_sqr())
}

/// Invert the local-SNR definition: the FO amplitude for which a tone of
/// duration `n_fo` out of `n_total` samples at `freq_hz` reaches `snr_db`
/// against the ambient density.
pub fn amplitude_for_snr(
    snr_db: f64,
    model: &ArmaModel,
    freq_hz: f64,
    n_fo: usize,
    n_total: usize,
) -> Result<f64> {
    if n_fo == 0 || n_fo > n_total {
        return Err(Error::InvalidParam(format!(
            "need 0 < n_fo <= n_total, got n_fo={n_fo}, n_total={n_total}"
        )));
    }
    let phi = psd_at(model, freq_hz)?;
    let ratio = n_total as f64 / n_fo as f64;
    Ok((2.0 * ratio * phi * 10f64.powf(snr_db / 10.0)).sqrt())
}

/// Local SNR (dB) of a tone of amplitude `amplitude` spanning `n_fo` of
/// `n_total` samples, against ambient density `phi` at the tone frequency.
pub fn local_snr_db(amplitude: f64, phi: f64, n_fo: usize, n_total: usize) -> f64 {
    let occupancy = n_fo as f64 / n_total as f64;
    10.0 * (occupancy * amplitude * amplitude / 2.0 / phi).log10()
}

/// Fit an AR(`order`) model to `record` via Yule-Walker / Levinson-Durbin.
/// Used as the field-mode source for the ambient density when no reference
/// model is configured.
pub fn fit_ar_yule_walker(record: &SignalRecord, order: usize) -> Result<ArmaModel> {
    let n = record.len();
    if n < 4 * order.max(1) {
        return Err(Error::ShortRecord {
            len: n,
            min: 4 * order.max(1),
        });
    }
    let mean = record.samples.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = record.samples.iter().map(|v| v - mean).collect();
    // Biased autocovariance estimates r[0..=order].
    let mut r = vec![0.0; order + 1];
    for (lag, rv) in r.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in lag..n {
            acc += centered[k] * centered[k - lag];
        }
        *rv = acc / n as f64;
    }
    if r[0] <= 0.0 {
        return Err(Error::InvalidParam("zero-variance record".into()));
    }
    // Levinson-Durbin recursion.
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for m in 1..=order {
        let mut acc = r[m];
        for i in 1..m {
            acc += a[i] * r[m - i];
        }
        let k = -acc / err;
        let prev = a.clone();
        for i in 1..m {
            a[i] = prev[i] + k * prev[m - i];
        }
        a[m] = k;
        err *= 1.0 - k * k;
        if err <= 0.0 {
            return Err(Error::InvalidParam(
                "Levinson-Durbin prediction error collapsed".into(),
            ));
        }
    }
    ArmaModel::new(a, vec![1.0], vec![1.0], err, record.sample_rate_hz)
}
