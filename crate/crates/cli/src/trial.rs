//! One Monte Carlo trial: simulate a record, gate on detection, time both
//! localizers on identical input, and refine the tone parameters on the
//! localized span.

use std::sync::Once;
use std::time::Instant;

use folo_core::{
    amplitude_for_snr, baseline_localize_iterative, detect_fo_in_band, estimate_fo, localize_report,
    simulate_ambient, wrap_phase, FoEstimate, FoIntervals, SignalRecord, DETECT_KAPPA,
};

use crate::config::ExperimentConfig;
use crate::record_io::fmt_f64;

pub const METHOD_PROPOSED: &str = "proposed";
pub const METHOD_BASELINE: &str = "baseline";

/// Everything recorded about one (trial, method) pair.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub snr_db: f64,
    pub trial_id: u64,
    pub seed: u64,
    pub method: &'static str,
    pub detected: bool,
    pub error: Option<String>,
    pub wall_ns: u64,
    pub pelt_calls: usize,
    pub intervals: Vec<(usize, usize)>,
    /// Longest localized span, when any.
    pub epsilon_hat: Option<usize>,
    pub eta_hat: Option<usize>,
    pub initial: Option<FoEstimate>,
    pub refined: Option<FoEstimate>,
    pub true_epsilon: usize,
    pub true_eta: usize,
    pub true_amp_mhz: f64,
    pub true_freq_hz: f64,
    pub true_phase_rad: f64,
}

impl TrialRecord {
    pub const CSV_HEADER: &'static str = "snr_db,trial_id,seed,method,detected,error,wall_ns,\
         pelt_calls,n_intervals,intervals,epsilon_hat,eta_hat,\
         initial_amp_mhz,initial_freq_hz,initial_phase_rad,\
         refined_amp_mhz,refined_freq_hz,refined_phase_rad,\
         true_epsilon,true_eta,true_amp_mhz,true_freq_hz,true_phase_rad";

    pub fn csv_row(&self) -> String {
        let intervals = self
            .intervals
            .iter()
            .map(|(s, e)| format!("{s}:{e}"))
            .collect::<Vec<_>>()
            .join(";");
        let opt_usize = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let est_cols = |est: &Option<FoEstimate>| match est {
            Some(e) => format!(
                "{},{},{}",
                fmt_f64(e.amplitude),
                fmt_f64(e.frequency_hz),
                fmt_f64(e.phase_rad)
            ),
            None => "nan,nan,nan".to_string(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(self.snr_db),
            self.trial_id,
            self.seed,
            self.method,
            self.detected as u8,
            self.error
                .as_deref()
                .unwrap_or("")
                .replace([',', '\n'], ";"),
            self.wall_ns,
            self.pelt_calls,
            self.intervals.len(),
            intervals,
            opt_usize(self.epsilon_hat),
            opt_usize(self.eta_hat),
            est_cols(&self.initial),
            est_cols(&self.refined),
            self.true_epsilon,
            self.true_eta,
            fmt_f64(self.true_amp_mhz),
            fmt_f64(self.true_freq_hz),
            fmt_f64(self.true_phase_rad),
        )
    }

    /// Row with wall-clock (and other timing-only fields) blanked, for
    /// byte-level reproducibility comparisons.
    pub fn csv_row_without_timing(&self) -> String {
        let full = self.csv_row();
        let mut cols: Vec<&str> = full.split(',').collect();
        cols[6] = "-";
        cols.join(",")
    }
}

/// Simulated benchmark input: ambient noise plus the output-referred tone
/// injected directly on its span, so the configured (epsilon, eta) are the
/// exact on/off samples of the observed oscillation.
pub fn simulate_trial_record(
    config: &ExperimentConfig,
    snr_db: f64,
    seed: u64,
) -> folo_core::Result<(SignalRecord, f64)> {
    let model = config.model.build()?;
    let n = config.n_samples;
    let n_fo = config.fo.end_sample - config.fo.start_sample + 1;
    let amp = amplitude_for_snr(snr_db, &model, config.fo.frequency_hz, n_fo, n)?;
    let mut rec = simulate_ambient(&model, n, seed)?;
    let w = 2.0 * std::f64::consts::PI * config.fo.frequency_hz / model.sample_rate_hz;
    for k in config.fo.start_sample..=config.fo.end_sample {
        rec.samples[k] += amp * (w * k as f64 + config.fo.phase_rad).cos();
    }
    rec.label = format!("trial snr={snr_db} seed={seed}");
    Ok((rec, amp))
}

fn refine_on_longest(
    y: &SignalRecord,
    intervals: &FoIntervals,
    fallback: &FoEstimate,
) -> Option<FoEstimate> {
    let (eps, eta) = intervals.longest()?;
    if eta - eps + 1 < 16 {
        return Some(*fallback);
    }
    let slice = y.slice(eps..eta + 1, "refine").ok()?;
    let est = estimate_fo(&slice).ok()?;
    // The slice phase is referenced to its own first sample; shift back to
    // the record origin.
    let w = 2.0 * std::f64::consts::PI * est.frequency_hz / y.sample_rate_hz;
    Some(FoEstimate {
        amplitude: est.amplitude,
        frequency_hz: est.frequency_hz,
        phase_rad: wrap_phase(est.phase_rad - w * eps as f64),
    })
}

static WARMUP: Once = Once::new();

/// One untimed pass per method so the first measured trial does not pay
/// one-time costs (allocator, FFT plans, code paths).
fn warm_up(config: &ExperimentConfig, y: &SignalRecord) {
    WARMUP.call_once(|| {
        let model = config.model.build().ok();
        let loc_cfg = config.localizer.build(model);
        let _ = localize_report(y, &loc_cfg);
        let _ = baseline_localize_iterative(
            y,
            config.baseline.n_max_cp,
            config
                .baseline
                .min_segment_samples(config.model.sample_rate_hz),
            config.baseline.alpha,
        );
    });
}

/// Run both methods on one simulated record. Detection gates the
/// localizers: an undetected record reports empty results for both.
pub fn run_trial(
    config: &ExperimentConfig,
    snr_db: f64,
    trial_id: u64,
    seed: u64,
) -> (TrialRecord, TrialRecord) {
    let blank = |method: &'static str, amp: f64| TrialRecord {
        snr_db,
        trial_id,
        seed,
        method,
        detected: false,
        error: None,
        wall_ns: 0,
        pelt_calls: 0,
        intervals: Vec::new(),
        epsilon_hat: None,
        eta_hat: None,
        initial: None,
        refined: None,
        true_epsilon: config.fo.start_sample,
        true_eta: config.fo.end_sample,
        true_amp_mhz: amp,
        true_freq_hz: config.fo.frequency_hz,
        true_phase_rad: config.fo.phase_rad,
    };

    let (y, amp) = match simulate_trial_record(config, snr_db, seed) {
        Ok(pair) => pair,
        Err(e) => {
            let mut a = blank(METHOD_PROPOSED, f64::NAN);
            a.error = Some(format!("simulation failed: {e}"));
            let mut b = blank(METHOD_BASELINE, f64::NAN);
            b.error = Some(format!("simulation failed: {e}"));
            return (a, b);
        }
    };

    let detected = detect_fo_in_band(&y, config.localizer.monitored_band_hz, DETECT_KAPPA);
    let mut proposed = blank(METHOD_PROPOSED, amp);
    let mut baseline = blank(METHOD_BASELINE, amp);
    proposed.detected = detected;
    baseline.detected = detected;
    if !detected {
        return (proposed, baseline);
    }

    warm_up(config, &y);

    let model = config.model.build().ok();
    let loc_cfg = config.localizer.build(model);
    let t0 = Instant::now();
    match localize_report(&y, &loc_cfg) {
        Ok(report) => {
            proposed.wall_ns = t0.elapsed().as_nanos() as u64;
            proposed.pelt_calls = report.pelt_calls;
            proposed.intervals = report.intervals.as_slice().to_vec();
            if let Some((eps, eta)) = report.intervals.longest() {
                proposed.epsilon_hat = Some(eps);
                proposed.eta_hat = Some(eta);
            }
            proposed.refined = refine_on_longest(&y, &report.intervals, &report.estimate);
            proposed.initial = Some(report.estimate);
        }
        Err(e) => {
            proposed.wall_ns = t0.elapsed().as_nanos() as u64;
            proposed.error = Some(e.to_string());
        }
    }

    let n_min_baseline = config
        .baseline
        .min_segment_samples(config.model.sample_rate_hz);
    let t1 = Instant::now();
    match baseline_localize_iterative(
        &y,
        config.baseline.n_max_cp,
        n_min_baseline,
        config.baseline.alpha,
    ) {
        Ok(report) => {
            baseline.wall_ns = t1.elapsed().as_nanos() as u64;
            baseline.pelt_calls = report.pelt_calls;
            baseline.intervals = report.intervals.as_slice().to_vec();
            if let Some((eps, eta)) = report.intervals.longest() {
                baseline.epsilon_hat = Some(eps);
                baseline.eta_hat = Some(eta);
            }
            baseline.refined = refine_on_longest(&y, &report.intervals, &report.estimate);
            baseline.initial = Some(report.estimate);
        }
        Err(e) => {
            baseline.wall_ns = t1.elapsed().as_nanos() as u64;
            baseline.error = Some(e.to_string());
        }
    }

    (proposed, baseline)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config() -> ExperimentConfig {
        ExperimentConfig {
            n_samples: 1500,
            fo: crate::config::FoTruthConfig {
                start_sample: 500,
                end_sample: 1100,
                ..Default::default()
            },
            trials_per_point: 1,
            baseline: crate::config::BaselineSettings {
                min_segment_seconds: 60.0,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn zero_amplitude_trial_reports_empty_for_both() {
        let cfg = quick_config();
        // Negative-infinite SNR gives amplitude exactly 0, leaving pure
        // ambient records; the detector is allowed its small false-positive
        // rate, so check the population rather than one seed.
        let mut undetected = 0;
        for seed in 0..10u64 {
            let (p, b) = run_trial(&cfg, f64::NEG_INFINITY, seed, 1000 + seed);
            assert_eq!(p.true_amp_mhz, 0.0);
            if !p.detected {
                undetected += 1;
                assert!(p.intervals.is_empty() && b.intervals.is_empty());
                assert_eq!(p.wall_ns, 0);
            }
        }
        assert!(undetected >= 8, "only {undetected}/10 trials stayed quiet");
    }

    #[test]
    fn same_seed_reproduces_everything_but_timing() {
        let cfg = quick_config();
        let (p1, b1) = run_trial(&cfg, 5.0, 3, 77);
        let (p2, b2) = run_trial(&cfg, 5.0, 3, 77);
        assert_eq!(p1.csv_row_without_timing(), p2.csv_row_without_timing());
        assert_eq!(b1.csv_row_without_timing(), b2.csv_row_without_timing());
    }

    #[test]
    fn strong_trial_localizes_near_truth() {
        let cfg = quick_config();
        let (p, b) = run_trial(&cfg, 10.0, 0, 11);
        assert!(p.detected);
        assert!(p.error.is_none(), "{:?}", p.error);
        let eps = p.epsilon_hat.unwrap() as i64;
        let eta = p.eta_hat.unwrap() as i64;
        assert!((eps - 500).abs() <= 30, "eps {eps}");
        assert!((eta - 1100).abs() <= 30, "eta {eta}");
        assert!(b.epsilon_hat.is_some());
        let refined = p.refined.unwrap();
        assert!((refined.frequency_hz - 0.370).abs() < 0.002);
        assert!((refined.amplitude - p.true_amp_mhz).abs() < 0.1 * p.true_amp_mhz);
        assert!(p.wall_ns > 0 && b.wall_ns > 0);
        assert!(b.pelt_calls > p.pelt_calls);
    }

    #[test]
    fn csv_row_has_header_arity() {
        let cfg = quick_config();
        let (p, _) = run_trial(&cfg, 0.0, 1, 5);
        let cols = p.csv_row().split(',').count();
        assert_eq!(cols, TrialRecord::CSV_HEADER.split(',').count());
    }
}
