//! Localization of forced-oscillation start/stop samples in power-grid
//! measurements via exact mean-shift changepoint detection.
//!
//! The pipeline estimates the tone's amplitude, frequency and phase from
//! the whole record, demodulates the record so the oscillation appears as
//! a mean shift ([`sinusoid::build_ycos`]), solves one penalized
//! segmentation with a penalty computed directly from the data
//! ([`changepoint::penalty_profile`]), and converts the resulting segment
//! means into on/off spans ([`localize::cps_to_intervals`]). The crate
//! also carries the iterative penalty-search baseline the single-solve
//! method replaces, plus an ARMA simulator for benchmark inputs.

pub mod changepoint;
pub mod error;
pub mod localize;
pub mod signal;
pub mod sinusoid;
pub mod spectrum;

pub use changepoint::{
    choose_beta, crops_max_changes, dp_optimal_oracle, pelt, penalty_profile, segment_cost,
    BetaStrategy, CropsOutcome, PenaltyProfile, Segmentation,
};
pub use error::{Error, Result};
pub use localize::{
    baseline_localize_iterative, cps_to_intervals, filter_short, localize, localize_report,
    min_segment_length, resolve_no_changepoints, BaselineReport, FoIntervals, LocalizeReport,
    LocalizerConfig,
};
pub use signal::{
    amplitude_for_snr, design_resonant_arma, fit_ar_yule_walker, local_snr_db, make_fo_input,
    psd_at, simulate_ambient, simulate_armax, ArmaModel, ForcedOscillation, GaussianNoise,
    SignalRecord,
};
pub use sinusoid::{
    build_ycos, detect_fo, detect_fo_in_band, estimate_amp_phase, estimate_fo,
    estimate_frequency, reconstruct_tone, wrap_phase, FoEstimate, DETECT_BAND_HZ, DETECT_KAPPA,
};
