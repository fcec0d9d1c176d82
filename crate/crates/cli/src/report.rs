//! Per-(SNR, method) summary statistics and the summary CSV.

use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::record_io::fmt_f64;
use crate::trial::TrialRecord;

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregated row for one (snr, method) cell.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub snr_db: f64,
    pub method: &'static str,
    pub n_trials: usize,
    pub n_detected: usize,
    pub n_errors: usize,
    pub n_with_intervals: usize,
    pub one_interval_rate: f64,
    pub mean_wall_ms: f64,
    pub std_wall_ms: f64,
    pub mean_pelt_calls: f64,
    pub mean_n_intervals: f64,
    pub mean_epsilon: f64,
    pub std_epsilon: f64,
    pub mean_eta: f64,
    pub std_eta: f64,
    pub mean_abs_eps_err: f64,
    pub mean_abs_eta_err: f64,
    pub mean_amp: f64,
    pub std_amp: f64,
    pub mean_freq: f64,
    pub std_freq: f64,
    pub mean_phase: f64,
    pub std_phase: f64,
}

pub const SUMMARY_HEADER: &str = "snr_db,method,n_trials,n_detected,n_errors,n_with_intervals,\
     one_interval_rate,mean_wall_ms,std_wall_ms,mean_pelt_calls,mean_n_intervals,\
     mean_epsilon,std_epsilon,mean_eta,std_eta,mean_abs_eps_err,mean_abs_eta_err,\
     mean_amp_mhz,std_amp_mhz,mean_freq_hz,std_freq_hz,mean_phase_rad,std_phase_rad";

impl SummaryRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(self.snr_db),
            self.method,
            self.n_trials,
            self.n_detected,
            self.n_errors,
            self.n_with_intervals,
            fmt_f64(self.one_interval_rate),
            fmt_f64(self.mean_wall_ms),
            fmt_f64(self.std_wall_ms),
            fmt_f64(self.mean_pelt_calls),
            fmt_f64(self.mean_n_intervals),
            fmt_f64(self.mean_epsilon),
            fmt_f64(self.std_epsilon),
            fmt_f64(self.mean_eta),
            fmt_f64(self.std_eta),
            fmt_f64(self.mean_abs_eps_err),
            fmt_f64(self.mean_abs_eta_err),
            fmt_f64(self.mean_amp),
            fmt_f64(self.std_amp),
            fmt_f64(self.mean_freq),
            fmt_f64(self.std_freq),
            fmt_f64(self.mean_phase),
            fmt_f64(self.std_phase),
        )
    }
}

/// Collapse trial records into per-(snr, method) rows. Rows come out
/// sorted by SNR then method name, independent of input order.
pub fn summarize(trials: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    if trials.is_empty() {
        bail!("cannot summarize an empty trial collection");
    }
    let mut keys: Vec<(u64, &'static str)> = trials
        .iter()
        .map(|t| (t.snr_db.to_bits(), t.method))
        .collect();
    keys.sort_by(|a, b| {
        f64::from_bits(a.0)
            .partial_cmp(&f64::from_bits(b.0))
            .unwrap()
            .then(a.1.cmp(b.1))
    });
    keys.dedup();
    let mut rows = Vec::with_capacity(keys.len());
    for (snr_bits, method) in keys {
        let snr_db = f64::from_bits(snr_bits);
        let cell: Vec<&TrialRecord> = trials
            .iter()
            .filter(|t| t.snr_db.to_bits() == snr_bits && t.method == method)
            .collect();
        let ran: Vec<&&TrialRecord> = cell
            .iter()
            .filter(|t| t.detected && t.error.is_none())
            .collect();
        let with_iv: Vec<&&TrialRecord> = ran
            .iter()
            .filter(|t| !t.intervals.is_empty())
            .copied()
            .collect();
        let walls: Vec<f64> = ran.iter().map(|t| t.wall_ns as f64 / 1e6).collect();
        let (mean_wall_ms, std_wall_ms) = mean_std(&walls);
        let eps: Vec<f64> = with_iv
            .iter()
            .filter_map(|t| t.epsilon_hat.map(|v| v as f64))
            .collect();
        let eta: Vec<f64> = with_iv
            .iter()
            .filter_map(|t| t.eta_hat.map(|v| v as f64))
            .collect();
        let (mean_epsilon, std_epsilon) = mean_std(&eps);
        let (mean_eta, std_eta) = mean_std(&eta);
        let abs_eps: Vec<f64> = with_iv
            .iter()
            .filter_map(|t| {
                t.epsilon_hat
                    .map(|v| (v as f64 - t.true_epsilon as f64).abs())
            })
            .collect();
        let abs_eta: Vec<f64> = with_iv
            .iter()
            .filter_map(|t| t.eta_hat.map(|v| (v as f64 - t.true_eta as f64).abs()))
            .collect();
        let amps: Vec<f64> = with_iv
            .iter()
            .filter_map(|t| t.refined.map(|r| r.amplitude))
            .collect();
        let freqs: Vec<f64> = with_iv
            .iter()
            .filter_map(|t| t.refined.map(|r| r.frequency_hz))
            .collect();
        let phases: Vec<f64> = with_iv
            .iter()
            .filter_map(|t| t.refined.map(|r| r.phase_rad))
            .collect();
        let (mean_amp, std_amp) = mean_std(&amps);
        let (mean_freq, std_freq) = mean_std(&freqs);
        let (mean_phase, std_phase) = mean_std(&phases);
        let calls: Vec<f64> = ran.iter().map(|t| t.pelt_calls as f64).collect();
        let n_ivs: Vec<f64> = ran.iter().map(|t| t.intervals.len() as f64).collect();
        rows.push(SummaryRow {
            snr_db,
            method,
            n_trials: cell.len(),
            n_detected: cell.iter().filter(|t| t.detected).count(),
            n_errors: cell.iter().filter(|t| t.error.is_some()).count(),
            n_with_intervals: with_iv.len(),
            one_interval_rate: if ran.is_empty() {
                f64::NAN
            } else {
                ran.iter().filter(|t| t.intervals.len() == 1).count() as f64 / ran.len() as f64
            },
            mean_wall_ms,
            std_wall_ms,
            mean_pelt_calls: mean_std(&calls).0,
            mean_n_intervals: mean_std(&n_ivs).0,
            mean_epsilon,
            std_epsilon,
            mean_eta,
            std_eta,
            mean_abs_eps_err: mean_std(&abs_eps).0,
            mean_abs_eta_err: mean_std(&abs_eta).0,
            mean_amp,
            std_amp,
            mean_freq,
            std_freq,
            mean_phase,
            std_phase,
        });
    }
    Ok(rows)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow], header_comments: &[String]) -> Result<()> {
    let mut out = String::new();
    out.push_str("# folo summary v1\n");
    for c in header_comments {
        out.push_str(&format!("# {c}\n"));
    }
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}
