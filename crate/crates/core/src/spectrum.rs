//! Shared spectral helpers: DTFT evaluation, FFT periodograms and a
//! Welch-averaged density estimate.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::signal::SignalRecord;

/// `sum_k y[k] exp(-j 2 pi f k / f_s)` by direct accumulation.
pub fn dtft(samples: &[f64], freq_hz: f64, sample_rate_hz: f64) -> Complex64 {
    let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz;
    let step = Complex64::from_polar(1.0, -w);
    let mut phasor = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for &v in samples {
        acc += v * phasor;
        phasor *= step;
    }
    acc
}

/// Magnitude of the zero-padded DFT, `pad` times the record length.
/// Returns (bin spacing in Hz, magnitudes for bins `0..pad*n/2`).
pub fn padded_spectrum_magnitude(y: &SignalRecord, pad: usize) -> (f64, Vec<f64>) {
    let n = y.len();
    let m = n * pad.max(1);
    let mut buf: Vec<Complex64> = y
        .samples
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    buf.resize(m, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let spacing = y.sample_rate_hz / m as f64;
    let mags = buf[..m / 2].iter().map(|c| c.norm()).collect();
    (spacing, mags)
}

/// Welch power spectral density estimate with Hann windows and 50%
/// overlap. Returns (bin spacing in Hz, one-sided density per bin for
/// bins `0..seg_len/2`), in signal-units^2 per Hz.
pub fn welch_psd(y: &SignalRecord, seg_len: usize) -> (f64, Vec<f64>) {
    let n = y.len();
    let l = seg_len.min(n).max(16);
    let hop = l / 2;
    let window: Vec<f64> = (0..l)
        .map(|k| {
            let x = std::f64::consts::PI * k as f64 / l as f64;
            x.sin() * x.sin()
        })
        .collect();
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(l);
    let mut acc = vec![0.0f64; l / 2];
    let mut count = 0usize;
    let mut start = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    while start + l <= n {
        for (k, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(y.samples[start + k] * window[k], 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf[..l / 2]) {
            *a += c.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = 2.0 / (y.sample_rate_hz * win_power * count.max(1) as f64);
    for a in &mut acc {
        *a *= scale;
    }
    (y.sample_rate_hz / l as f64, acc)
}

/// Median of a slice (copies; midpoint average for even lengths).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}
