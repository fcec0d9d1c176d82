//! From a mean-shift segmentation of the demodulated record to on/off
//! spans of the oscillation, with the SNR-derived minimum segment length,
//! the no-changepoint fallback, and the iterative baseline localizer.

use crate::changepoint::{
    choose_beta, crops_max_changes, pelt, penalty_profile, BetaStrategy, SOLVER_MIN_SEG_LEN,
};
use crate::error::{Error, Result};
use crate::signal::{psd_at, ArmaModel, SignalRecord};
use crate::sinusoid::{
    build_ycos, detect_fo_in_band, estimate_fo, reconstruct_tone, FoEstimate, DETECT_KAPPA,
};
use crate::spectrum::welch_psd;

/// Boundary jumps at or below this magnitude are treated as "no event"
/// when reading the piecewise-constant mean array.
const EVENT_TOL: f64 = 1e-12;

/// Ordered, disjoint spans `[epsilon, eta]` (inclusive) where the
/// oscillation is on.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FoIntervals {
    intervals: Vec<(usize, usize)>,
}

impl FoIntervals {
    pub fn new(intervals: Vec<(usize, usize)>, n_samples: usize) -> Result<Self> {
        let mut last_end: Option<usize> = None;
        for &(start, end) in &intervals {
            if start > end || end >= n_samples {
                return Err(Error::InvalidParam(format!(
                    "interval ({start}, {end}) invalid for record of length {n_samples}"
                )));
            }
            if let Some(prev) = last_end {
                if start <= prev {
                    return Err(Error::InvalidParam(format!(
                        "interval ({start}, {end}) overlaps or is out of order"
                    )));
                }
            }
            last_end = Some(end);
        }
        Ok(Self { intervals })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn as_slice(&self) -> &[(usize, usize)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// The longest span, ties broken toward the earliest.
    pub fn longest(&self) -> Option<(usize, usize)> {
        self.intervals
            .iter()
            .copied()
            .max_by_key(|&(s, e)| (e - s, usize::MAX - s))
    }

    /// Indicator reconstruction: 1.0 on every covered sample.
    pub fn indicator(&self, n_samples: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_samples];
        for &(s, e) in &self.intervals {
            for v in &mut out[s..=e] {
                *v = 1.0;
            }
        }
        out
    }
}

/// Knobs of the proposed localizer.
#[derive(Debug, Clone)]
pub struct LocalizerConfig {
    pub beta_strategy: BetaStrategy,
    /// Smallest local SNR (dB) considered able to bias a mode estimator.
    pub snr_min_db: f64,
    /// Largest oscillation amplitude (mHz) expected in practice.
    pub a_max_mhz: f64,
    /// Band searched by the detector, Hz.
    pub monitored_band_hz: (f64, f64),
    /// Ambient density source. When set (benchmark mode) the analytic
    /// density of this model is used; otherwise a robust spectral level
    /// is measured from the tone-subtracted record (field mode).
    pub reference_model: Option<ArmaModel>,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        Self {
            beta_strategy: BetaStrategy::MeanProfile,
            snr_min_db: -15.0,
            a_max_mhz: 10.0,
            monitored_band_hz: (0.1, 1.0),
            reference_model: None,
        }
    }
}

/// Everything the benchmark wants to know about one localization run.
#[derive(Debug, Clone)]
pub struct LocalizeReport {
    pub intervals: FoIntervals,
    pub estimate: FoEstimate,
    /// Penalty used, when the solver ran.
    pub beta: Option<f64>,
    /// Minimum admissible span, in samples.
    pub n_min_sl: usize,
    /// Ambient density at the estimated frequency.
    pub phi_at_fhat: f64,
    pub pelt_calls: usize,
    /// True when the answer came from the no-changepoint path.
    pub used_fallback: bool,
}

/// Baseline run outcome with its instrumentation.
#[derive(Debug, Clone)]
pub struct BaselineReport {
    pub intervals: FoIntervals,
    pub estimate: FoEstimate,
    pub pelt_calls: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BoundaryEvent {
    Rise(usize),
    Fall(usize),
}

/// Convert the per-sample segment-mean array into on/off spans.
///
/// Rises of the mean open a span, falls close it (the closing index is the
/// last sample before the drop). Runs of same-kind events collapse: the
/// first of consecutive opens wins, the last of consecutive closes wins.
/// A leading close pairs with sample 0; a trailing open pairs with the
/// final sample.
pub fn cps_to_intervals(sample_means: &[f64], n_samples: usize) -> Result<FoIntervals> {
    if sample_means.len() != n_samples || n_samples < 2 {
        return Err(Error::InvalidParam(format!(
            "mean array of length {} does not match record length {n_samples}",
            sample_means.len()
        )));
    }
    let mut events: Vec<BoundaryEvent> = Vec::new();
    for k in 1..n_samples {
        let jump = sample_means[k] - sample_means[k - 1];
        if jump > EVENT_TOL {
            events.push(BoundaryEvent::Rise(k));
        } else if jump < -EVENT_TOL {
            events.push(BoundaryEvent::Fall(k));
        }
    }
    if events.len() > n_samples / 2 {
        return Err(Error::NotPiecewiseConstant {
            changes: events.len(),
            len: n_samples,
        });
    }
    // Collapse same-kind runs.
    let mut grouped: Vec<BoundaryEvent> = Vec::new();
    for ev in events {
        match (grouped.last_mut(), ev) {
            (Some(BoundaryEvent::Rise(_)), BoundaryEvent::Rise(_)) => {} // keep first
            (Some(last @ BoundaryEvent::Fall(_)), BoundaryEvent::Fall(k)) => {
                *last = BoundaryEvent::Fall(k); // keep last
            }
            _ => grouped.push(ev),
        }
    }
    // Pad the ends, then pair off alternating open/close events.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut open: Option<usize> = None;
    for ev in &grouped {
        match *ev {
            BoundaryEvent::Rise(k) => {
                debug_assert!(open.is_none(), "events must alternate after grouping");
                open = Some(k);
            }
            BoundaryEvent::Fall(k) => {
                let start = open.take().unwrap_or(0);
                pairs.push((start, k - 1));
            }
        }
    }
    if let Some(start) = open {
        pairs.push((start, n_samples - 1));
    }
    FoIntervals::new(pairs, n_samples)
}

/// Minimum span (samples) an oscillation of amplitude `a_max_mhz` must
/// cover before its local SNR reaches `snr_min_db` against an ambient
/// density `psd_at_f`. Rounded up; never below 1.
pub fn min_segment_length(
    snr_min_db: f64,
    a_max_mhz: f64,
    psd_at_f: f64,
    n_total: usize,
) -> usize {
    assert!(a_max_mhz > 0.0, "a_max_mhz must be positive");
    assert!(psd_at_f > 0.0, "psd_at_f must be positive");
    let raw = 2.0 * n_total as f64 * 10f64.powf(snr_min_db / 10.0) * psd_at_f
        / (a_max_mhz * a_max_mhz);
    // Tolerant ceiling: do not let a 1-ulp overshoot add a whole sample.
    let adjusted = raw - 1e-9 * raw.abs().max(1.0);
    adjusted.ceil().max(1.0) as usize
}

/// Drop every span shorter than `n_min_sl` samples.
pub fn filter_short(intervals: &FoIntervals, n_min_sl: usize) -> FoIntervals {
    FoIntervals {
        intervals: intervals
            .intervals
            .iter()
            .copied()
            .filter(|&(s, e)| e - s + 1 >= n_min_sl)
            .collect(),
    }
}

/// The tone-subtracted residual `x_hat = y - u_star`.
fn residual_record(y: &SignalRecord, est: &FoEstimate) -> Result<SignalRecord> {
    let tone = reconstruct_tone(est, y.len(), y.sample_rate_hz);
    let residual: Vec<f64> = y
        .samples
        .iter()
        .zip(&tone)
        .map(|(v, u)| v - u)
        .collect();
    SignalRecord::new(residual, y.sample_rate_hz, "residual")
}

/// Shared outcome rule of the no-changepoint path, given the result of
/// detection on the residual: a still-detectable tone means the original
/// detection pointed at something the estimate does not explain, so the
/// claim is dropped; a quiet residual supports a record-spanning tone,
/// accepted only if the estimated amplitude carries at least
/// `snr_min_db` of local SNR over the full record (the same viability
/// rule the short-segment filter applies).
fn fallback_outcome(
    residual_detected: bool,
    est: &FoEstimate,
    phi_at_fhat: f64,
    config: &LocalizerConfig,
    n: usize,
) -> Result<FoIntervals> {
    if residual_detected {
        return Ok(FoIntervals::empty());
    }
    let full_span_viable =
        est.amplitude * est.amplitude / 2.0 >= 10f64.powf(config.snr_min_db / 10.0) * phi_at_fhat;
    if full_span_viable {
        FoIntervals::new(vec![(0, n - 1)], n)
    } else {
        Ok(FoIntervals::empty())
    }
}

/// No-changepoint resolution: subtract the reconstructed tone, re-run
/// detection on the residual, and either report the full record or
/// nothing.
pub fn resolve_no_changepoints(
    y: &SignalRecord,
    est: &FoEstimate,
    phi_at_fhat: f64,
    config: &LocalizerConfig,
) -> Result<FoIntervals> {
    let x_hat = residual_record(y, est)?;
    let detected = detect_fo_in_band(&x_hat, config.monitored_band_hz, DETECT_KAPPA);
    fallback_outcome(detected, est, phi_at_fhat, config, y.len())
}

/// Welch segment length of the field-mode density estimate.
const FIELD_WELCH_SEG: usize = 1024;
/// Annulus around the tone bin used for the robust level: bins at offsets
/// `EXCLUDE..=HALF_WIN` on both sides enter the median; the central bins
/// are excluded because the residual tone leaks into them.
const FIELD_EXCLUDE_BINS: usize = 3;
const FIELD_HALF_WIN_BINS: usize = 10;

fn ambient_density_at(
    x_hat: &SignalRecord,
    est: &FoEstimate,
    config: &LocalizerConfig,
) -> Result<f64> {
    match &config.reference_model {
        Some(model) => psd_at(model, est.frequency_hz),
        None => {
            // Field mode. Subtracting the reconstructed tone removes it
            // only where it was actually on, so the residual record still
            // carries narrowband energy at f_hat; a parametric fit pushes
            // a pole onto that line and overstates the density by orders
            // of magnitude. A median over Welch ordinates next to the
            // tone bin is robust to the leftover line.
            let (spacing, psd) = welch_psd(x_hat, FIELD_WELCH_SEG.min(x_hat.len() / 4));
            let center = (est.frequency_hz / spacing).round() as usize;
            let mut annulus = Vec::new();
            for off in FIELD_EXCLUDE_BINS..=FIELD_HALF_WIN_BINS {
                if let Some(&v) = psd.get(center.saturating_sub(off).max(1)) {
                    annulus.push(v);
                }
                if let Some(&v) = psd.get(center + off) {
                    annulus.push(v);
                }
            }
            let level = crate::spectrum::median(&annulus);
            if !(level > 0.0) {
                return Err(Error::InvalidParam(
                    "field-mode density estimate is not positive".into(),
                ));
            }
            Ok(level)
        }
    }
}

/// Proposed single-solve localizer. The caller is expected to invoke this
/// only after a positive detection on `y`.
pub fn localize(y: &SignalRecord, config: &LocalizerConfig) -> Result<(FoIntervals, FoEstimate)> {
    let report = localize_report(y, config)?;
    Ok((report.intervals, report.estimate))
}

/// [`localize`] with full diagnostics.
pub fn localize_report(y: &SignalRecord, config: &LocalizerConfig) -> Result<LocalizeReport> {
    let estimate = estimate_fo(y)?;
    let ycos = build_ycos(y, &estimate)?;
    let x_hat = residual_record(y, &estimate)?;
    let residual_detected =
        detect_fo_in_band(&x_hat, config.monitored_band_hz, DETECT_KAPPA);
    let phi = ambient_density_at(&x_hat, &estimate, config)?;
    let n_min_sl = min_segment_length(config.snr_min_db, config.a_max_mhz, phi, y.len());

    let profile = penalty_profile(&ycos)?;
    let (beta, segmentation) = match choose_beta(&profile, config.beta_strategy) {
        Ok(beta) => (Some(beta), Some(pelt(&ycos, beta, SOLVER_MIN_SEG_LEN)?)),
        Err(Error::NoPenaltyScale) => (None, None),
        Err(e) => return Err(e),
    };
    let pelt_calls = segmentation.is_some() as usize;

    let surviving = match &segmentation {
        Some(seg) if seg.num_changepoints() > 0 => {
            let means = seg.sample_means(y.len());
            filter_short(&cps_to_intervals(&means, y.len())?, n_min_sl)
        }
        _ => FoIntervals::empty(),
    };
    // Two situations route to the no-changepoint resolution: nothing
    // survived the minimum-length filter, or the subtracted tone already
    // explains every detectable tone in the record (quiet residual), in
    // which case any surviving splits track noise rather than on/off
    // boundaries. A detectable residual with surviving spans is the
    // normal partial-record outcome.
    let spans_are_spurious = !surviving.is_empty() && !residual_detected;
    let (intervals, used_fallback) = if surviving.is_empty() || spans_are_spurious {
        (
            fallback_outcome(residual_detected, &estimate, phi, config, y.len())?,
            true,
        )
    } else {
        (surviving, false)
    };
    Ok(LocalizeReport {
        intervals,
        estimate,
        beta,
        n_min_sl,
        phi_at_fhat: phi,
        pelt_calls,
        used_fallback,
    })
}

/// Iterative baseline: penalty-range search capped at `n_max_cp` changes,
/// rerun with a lower cap while segments fall under `n_min_sl`, then
/// segments classified as "on" when their mean exceeds
/// `alpha * 0.5 * A_hat^2`.
pub fn baseline_localize_iterative(
    y: &SignalRecord,
    n_max_cp: usize,
    n_min_sl: usize,
    alpha: f64,
) -> Result<BaselineReport> {
    let estimate = estimate_fo(y)?;
    let ycos = build_ycos(y, &estimate)?;
    let outcome = crops_max_changes(&ycos, n_max_cp, n_min_sl)?;
    let seg = &outcome.segmentation;
    let threshold = alpha * 0.5 * estimate.amplitude * estimate.amplitude;
    let n = y.len();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    if seg.num_changepoints() > 0 {
        for ((start, end), &mean) in seg.segment_bounds(n).into_iter().zip(&seg.segment_means) {
            if mean > threshold {
                match pairs.last_mut() {
                    Some(last) if last.1 + 1 == start => last.1 = end - 1,
                    _ => pairs.push((start, end - 1)),
                }
            }
        }
    }
    Ok(BaselineReport {
        intervals: FoIntervals::new(pairs, n)?,
        estimate,
        pelt_calls: outcome.pelt_calls,
    })
}
