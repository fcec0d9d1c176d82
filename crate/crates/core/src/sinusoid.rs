//! Tone parameter estimation and the demodulation product that turns an
//! on/off oscillation into a mean shift.

use crate::error::{Error, Result};
use crate::signal::SignalRecord;
use crate::spectrum::{dtft, median, padded_spectrum_magnitude, welch_psd};

/// Zero-padding factor for the coarse spectral peak search.
const COARSE_PAD: usize = 8;
/// Frequency tolerance of the golden-section peak refinement, in Hz.
const REFINE_TOL_HZ: f64 = 1e-7;
/// Detection threshold: a band ordinate must exceed this multiple of the
/// local median level. Calibrated on the default resonant model to keep
/// the ambient false-positive rate under 5%.
pub const DETECT_KAPPA: f64 = 6.0;
/// Monitored band for detection, Hz (inter-area oscillation range).
pub const DETECT_BAND_HZ: (f64, f64) = (0.1, 1.0);
/// Welch segment length used by the detector.
const DETECT_SEG_LEN: usize = 512;
/// Half-width, in bins, of the running-median baseline.
const DETECT_MEDIAN_HALF_WIN: usize = 7;

/// Estimated tone parameters: amplitude in mHz, frequency in Hz, phase in
/// radians wrapped to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoEstimate {
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub phase_rad: f64,
}

/// Wrap an angle to the principal branch `(-pi, pi]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = theta % two_pi;
    if t <= -std::f64::consts::PI {
        t += two_pi;
    } else if t > std::f64::consts::PI {
        t -= two_pi;
    }
    t
}

/// Locate the dominant spectral peak: coarse zero-padded DFT search over
/// the open band `(0, f_s/2)`, then golden-section maximization of the
/// DTFT magnitude around the winning bin.
pub fn estimate_frequency(y: &SignalRecord) -> Result<f64> {
    if y.len() < 16 {
        return Err(Error::ShortRecord {
            len: y.len(),
            min: 16,
        });
    }
    let (spacing, mags) = padded_spectrum_magnitude(y, COARSE_PAD);
    // Skip DC and the last bin so the refinement bracket stays in band.
    let mut best_bin = 1usize;
    let mut best_mag = f64::MIN;
    for (bin, &m) in mags.iter().enumerate().skip(1).take(mags.len() - 2) {
        if m > best_mag {
            best_mag = m;
            best_bin = bin;
        }
    }
    let lo = (best_bin as f64 - 1.0) * spacing;
    let hi = (best_bin as f64 + 1.0) * spacing;
    Ok(golden_section_peak(y, lo.max(spacing * 0.5), hi))
}

fn golden_section_peak(y: &SignalRecord, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mag = |f: f64| dtft(&y.samples, f, y.sample_rate_hz).norm();
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = mag(a);
    let mut fb = mag(b);
    while hi - lo > REFINE_TOL_HZ {
        if fa > fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = mag(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = mag(b);
        }
    }
    0.5 * (lo + hi)
}

/// Amplitude and phase by evaluating the DTFT at `f_hat`:
/// `Z = (2/N) sum y[k] exp(-j 2 pi f k / f_s)`, amplitude `|Z|`,
/// phase `arg Z`.
pub fn estimate_amp_phase(y: &SignalRecord, f_hat: f64) -> Result<FoEstimate> {
    if !(f_hat > 0.0 && f_hat < y.nyquist_hz()) {
        return Err(Error::OutOfBand {
            freq_hz: f_hat,
            nyquist_hz: y.nyquist_hz(),
        });
    }
    let z = dtft(&y.samples, f_hat, y.sample_rate_hz) * (2.0 / y.len() as f64);
    Ok(FoEstimate {
        amplitude: z.norm(),
        frequency_hz: f_hat,
        phase_rad: wrap_phase(z.arg()),
    })
}

/// Full estimation pipeline on one record: peak frequency, then amplitude
/// and phase at that frequency.
pub fn estimate_fo(y: &SignalRecord) -> Result<FoEstimate> {
    let f_hat = estimate_frequency(y)?;
    estimate_amp_phase(y, f_hat)
}

/// Demodulation product `y_cos[k] = y[k] * A_hat cos(2 pi f_hat k / f_s +
/// theta_hat)`. Where the tone is active this has mean `A_tilde * A_hat / 2`;
/// elsewhere the mean is zero.
pub fn build_ycos(y: &SignalRecord, est: &FoEstimate) -> Result<SignalRecord> {
    if !(est.frequency_hz > 0.0 && est.frequency_hz < y.nyquist_hz()) {
        return Err(Error::OutOfBand {
            freq_hz: est.frequency_hz,
            nyquist_hz: y.nyquist_hz(),
        });
    }
    let w = 2.0 * std::f64::consts::PI * est.frequency_hz / y.sample_rate_hz;
    let samples: Vec<f64> = y
        .samples
        .iter()
        .enumerate()
        .map(|(k, &v)| v * est.amplitude * (w * k as f64 + est.phase_rad).cos())
        .collect();
    SignalRecord::new(samples, y.sample_rate_hz, "ycos")
}

/// Rebuild the estimated tone over all `n` samples (no on/off indicator).
pub fn reconstruct_tone(est: &FoEstimate, n: usize, sample_rate_hz: f64) -> Vec<f64> {
    let w = 2.0 * std::f64::consts::PI * est.frequency_hz / sample_rate_hz;
    (0..n)
        .map(|k| est.amplitude * (w * k as f64 + est.phase_rad).cos())
        .collect()
}

/// Spectral-peak tone detector over the default monitored band.
pub fn detect_fo(y: &SignalRecord) -> bool {
    detect_fo_in_band(y, DETECT_BAND_HZ, DETECT_KAPPA)
}

/// Detector core: Welch density over `band`, whitened by a running median
/// so the resonant ambient shape does not trigger; fires when any ordinate
/// exceeds `kappa` times its local baseline.
pub fn detect_fo_in_band(y: &SignalRecord, band: (f64, f64), kappa: f64) -> bool {
    assert!(y.len() >= 64, "detector needs at least 64 samples");
    if y.samples.iter().all(|&v| v == 0.0) {
        return false;
    }
    let (spacing, psd) = welch_psd(y, DETECT_SEG_LEN);
    let lo_bin = (band.0 / spacing).ceil() as usize;
    let hi_bin = ((band.1 / spacing).floor() as usize).min(psd.len().saturating_sub(1));
    if lo_bin >= hi_bin {
        return false;
    }
    for bin in lo_bin..=hi_bin {
        let w_lo = bin.saturating_sub(DETECT_MEDIAN_HALF_WIN).max(1);
        let w_hi = (bin + DETECT_MEDIAN_HALF_WIN).min(psd.len() - 1);
        let baseline = median(&psd[w_lo..=w_hi]);
        if baseline > 0.0 && psd[bin] > kappa * baseline {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{
        design_resonant_arma, make_fo_input, simulate_ambient, simulate_armax, ForcedOscillation,
    };

    fn tone(n: usize, fs: f64, a: f64, f: f64, theta: f64) -> SignalRecord {
        let w = 2.0 * std::f64::consts::PI * f / fs;
        let samples = (0..n).map(|k| a * (w * k as f64 + theta).cos()).collect();
        SignalRecord::new(samples, fs, "tone").unwrap()
    }

    fn default_model() -> crate::signal::ArmaModel {
        design_resonant_arma(0.372, 0.0467, 3.0, 0.16).unwrap()
    }

    #[test]
    fn frequency_of_exact_bin_tone() {
        let y = tone(4500, 3.0, 1.0, 0.7, 0.0);
        let f = estimate_frequency(&y).unwrap();
        assert!((f - 0.7).abs() < 1e-6, "f_hat {f}");
    }

    #[test]
    fn frequency_of_off_bin_tone_matches_dense_scan() {
        // 0.370 Hz is off the N=4500 DFT grid.
        let y = tone(4500, 3.0, 1.0, 0.370, 0.3);
        let f = estimate_frequency(&y).unwrap();
        // Oracle: dense 1e-7-step DTFT scan around the nominal frequency.
        let mut best = (0.0, f64::MIN);
        let mut g = 0.3695;
        while g <= 0.3705 {
            let m = dtft(&y.samples, g, 3.0).norm();
            if m > best.1 {
                best = (g, m);
            }
            g += 1e-7;
        }
        assert!((f - best.0).abs() < 2e-7, "refined {f} vs scan {}", best.0);
        assert!((f - 0.370).abs() < 1e-5, "estimate {f} vs true 0.370");
    }

    #[test]
    fn frequency_rejects_short_records() {
        let y = tone(8, 3.0, 1.0, 0.7, 0.0);
        // Construction succeeds; estimation must refuse.
        assert!(estimate_frequency(&y).is_err());
    }

    #[test]
    fn amp_phase_of_pure_tone() {
        let y = tone(4500, 3.0, 3.0, 0.41, 1.0);
        let est = estimate_amp_phase(&y, 0.41).unwrap();
        assert!((est.amplitude - 3.0).abs() < 1e-3, "amp {}", est.amplitude);
        assert!((est.phase_rad - 1.0).abs() < 1e-3, "phase {}", est.phase_rad);
    }

    #[test]
    fn amp_phase_of_zero_record_is_zero() {
        let y = SignalRecord::new(vec![0.0; 256], 3.0, "z").unwrap();
        let est = estimate_amp_phase(&y, 0.4).unwrap();
        assert_eq!(est.amplitude, 0.0);
    }

    #[test]
    fn partial_span_tone_biases_amplitude_by_occupancy() {
        // Tone on 40% of the record: the full-record estimate reads ~0.4 A.
        let n = 4500;
        let fo = ForcedOscillation {
            amplitude: 5.0,
            frequency_hz: 0.37,
            phase_rad: 0.2,
            start_sample: 1535,
            end_sample: 3334,
        };
        let y = make_fo_input(&fo, n, 3.0).unwrap();
        let est = estimate_amp_phase(&y, 0.37).unwrap();
        // Oracle: geometric partial sum of the windowed tone's DTFT.
        let w = 2.0 * std::f64::consts::PI * 0.37 / 3.0;
        let mut acc = num_complex::Complex64::new(0.0, 0.0);
        for k in fo.start_sample..=fo.end_sample {
            let ph = w * k as f64;
            acc += num_complex::Complex64::new(
                5.0 * (ph + 0.2).cos() * ph.cos(),
                -5.0 * (ph + 0.2).cos() * ph.sin(),
            );
        }
        let oracle_amp = acc.norm() * 2.0 / n as f64;
        assert!((est.amplitude - oracle_amp).abs() < 1e-9);
        let occupancy = fo.duration_samples() as f64 / n as f64;
        assert!(
            (est.amplitude / 5.0 - occupancy).abs() < 0.01,
            "bias factor {}",
            est.amplitude / 5.0
        );
    }

    #[test]
    fn phase_equivariance_of_amp_phase() {
        let delta = 0.83;
        let base = tone(3000, 3.0, 2.0, 0.52, 0.4);
        let shifted = tone(3000, 3.0, 2.0, 0.52, 0.4 + delta);
        let e0 = estimate_amp_phase(&base, 0.52).unwrap();
        let e1 = estimate_amp_phase(&shifted, 0.52).unwrap();
        assert!((e1.amplitude - e0.amplitude).abs() < 1e-9);
        let dphi = wrap_phase(e1.phase_rad - e0.phase_rad - delta);
        assert!(dphi.abs() < 1e-9, "phase shift error {dphi}");
    }

    #[test]
    fn scale_equivariance_of_amp_phase() {
        let y = tone(3000, 3.0, 2.0, 0.52, -0.9);
        let scaled = SignalRecord::new(
            y.samples.iter().map(|v| 3.5 * v).collect(),
            3.0,
            "scaled",
        )
        .unwrap();
        let e0 = estimate_amp_phase(&y, 0.52).unwrap();
        let e1 = estimate_amp_phase(&scaled, 0.52).unwrap();
        assert!((e1.amplitude - 3.5 * e0.amplitude).abs() < 1e-9);
        assert!((e1.phase_rad - e0.phase_rad).abs() < 1e-12);
    }

    #[test]
    fn ycos_mean_is_half_for_unit_tone() {
        let y = tone(4500, 3.0, 1.0, 0.7, 0.0);
        let est = FoEstimate {
            amplitude: 1.0,
            frequency_hz: 0.7,
            phase_rad: 0.0,
        };
        let yc = build_ycos(&y, &est).unwrap();
        let mean = yc.samples.iter().sum::<f64>() / yc.len() as f64;
        assert!((mean - 0.5).abs() < 1e-3, "mean {mean}");
    }

    #[test]
    fn ycos_is_linear_in_the_record() {
        let y1 = tone(600, 3.0, 1.0, 0.4, 0.1);
        let y2 = tone(600, 3.0, 0.7, 0.9, 1.3);
        let sum = SignalRecord::new(
            y1.samples
                .iter()
                .zip(&y2.samples)
                .map(|(a, b)| a + b)
                .collect(),
            3.0,
            "sum",
        )
        .unwrap();
        let est = FoEstimate {
            amplitude: 2.0,
            frequency_hz: 0.4,
            phase_rad: 0.5,
        };
        let lhs = build_ycos(&sum, &est).unwrap();
        let r1 = build_ycos(&y1, &est).unwrap();
        let r2 = build_ycos(&y2, &est).unwrap();
        for k in 0..600 {
            let rhs = r1.samples[k] + r2.samples[k];
            // (a + b) c and a c + b c round differently in the last ulp.
            assert!(
                (lhs.samples[k] - rhs).abs() <= 1e-15 * lhs.samples[k].abs().max(1.0),
                "linearity at {k}: {} vs {rhs}",
                lhs.samples[k]
            );
        }
    }

    #[test]
    fn ycos_ambient_mean_shrinks_with_record_length() {
        // Monte Carlo: ambient-only y_cos means are centered on zero and
        // their spread shrinks at the 1/sqrt(N) rate.
        let m = default_model();
        let est = FoEstimate {
            amplitude: 1.0,
            frequency_hz: 0.37,
            phase_rad: 0.0,
        };
        let trials = 300u64;
        let rms = |n: usize, base: u64| -> (f64, f64) {
            let mut sum = 0.0;
            let mut sq = 0.0;
            for seed in 0..trials {
                let x = simulate_ambient(&m, n, base + seed).unwrap();
                let yc = build_ycos(&x, &est).unwrap();
                let mean = yc.samples.iter().sum::<f64>() / yc.len() as f64;
                sum += mean;
                sq += mean * mean;
            }
            (sum / trials as f64, (sq / trials as f64).sqrt())
        };
        let (grand_short, rms_short) = rms(4500, 40_000);
        let (_, rms_long) = rms(18_000, 90_000);
        assert!(grand_short.abs() < 0.02, "grand mean {grand_short}");
        // The demodulated ambient is band-limited noise with a correlation
        // time of tens of samples; its 4500-sample mean has an RMS near
        // 0.09 here.
        assert!(rms_short < 0.15, "rms of means {rms_short}");
        let shrink = rms_short / rms_long;
        assert!(
            shrink > 1.4 && shrink < 2.9,
            "4x record length should halve the rms: factor {shrink}"
        );
    }

    #[test]
    fn ycos_bench_geometry_mean_separation() {
        // Noiseless tone on [1535, 3334] with true parameters supplied.
        let n = 4500;
        let a_tilde = 4.0;
        let fo = ForcedOscillation {
            amplitude: a_tilde,
            frequency_hz: 0.37,
            phase_rad: 0.6,
            start_sample: 1535,
            end_sample: 3334,
        };
        let y = make_fo_input(&fo, n, 3.0).unwrap();
        let est = FoEstimate {
            amplitude: a_tilde,
            frequency_hz: 0.37,
            phase_rad: 0.6,
        };
        let yc = build_ycos(&y, &est).unwrap();
        let on_mean = yc.samples[1535..=3334].iter().sum::<f64>() / 1800.0;
        let off_mean: f64 = (yc.samples[..1535].iter().sum::<f64>()
            + yc.samples[3335..].iter().sum::<f64>())
            / 2700.0;
        let expect = 0.5 * a_tilde * a_tilde;
        assert!(
            (on_mean - expect).abs() < 0.02 * expect,
            "on-mean {on_mean} vs {expect}"
        );
        assert!(off_mean.abs() < 1e-12, "off-mean {off_mean}");
    }

    #[test]
    fn detector_rejects_zero_record() {
        let y = SignalRecord::new(vec![0.0; 4500], 3.0, "z").unwrap();
        assert!(!detect_fo(&y));
    }

    #[test]
    fn detector_false_positive_rate_on_ambient() {
        let m = default_model();
        let trials = 300;
        let mut fired = 0;
        for seed in 0..trials {
            let x = simulate_ambient(&m, 4500, 60_000 + seed).unwrap();
            if detect_fo(&x) {
                fired += 1;
            }
        }
        assert!(
            fired * 20 <= trials,
            "false positives {fired}/{trials} exceed 5%"
        );
    }

    #[test]
    fn detector_fires_on_strong_full_span_tone() {
        let m = default_model();
        let gain = m.input_transfer(0.37).norm();
        let trials = 300;
        let mut fired = 0;
        for seed in 0..trials {
            let a_out =
                crate::signal::amplitude_for_snr(10.0, &m, 0.37, 4500, 4500).unwrap();
            let fo = ForcedOscillation {
                amplitude: a_out / gain,
                frequency_hz: 0.37,
                phase_rad: 0.0,
                start_sample: 0,
                end_sample: 4499,
            };
            let y = simulate_armax(&m, &fo, 4500, 70_000 + seed).unwrap();
            if detect_fo(&y) {
                fired += 1;
            }
        }
        assert!(
            fired * 100 >= trials * 99,
            "detections {fired}/{trials} below 99%"
        );
    }
}
