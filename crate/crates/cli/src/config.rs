//! Versioned experiment configuration, JSON on disk, hashed into every
//! emitted CSV so results stay traceable to their settings.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use folo_core::{design_resonant_arma, ArmaModel, BetaStrategy, LocalizerConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub mode_freq_hz: f64,
    pub damping_ratio: f64,
    pub noise_variance: f64,
    pub sample_rate_hz: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            mode_freq_hz: 0.372,
            damping_ratio: 0.0467,
            noise_variance: 0.16,
            sample_rate_hz: 3.0,
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> folo_core::Result<ArmaModel> {
        design_resonant_arma(
            self.mode_freq_hz,
            self.damping_ratio,
            self.sample_rate_hz,
            self.noise_variance,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoTruthConfig {
    pub frequency_hz: f64,
    pub phase_rad: f64,
    pub start_sample: usize,
    pub end_sample: usize,
}

impl Default for FoTruthConfig {
    fn default() -> Self {
        Self {
            frequency_hz: 0.370,
            phase_rad: 0.0,
            start_sample: 1535,
            end_sample: 3334,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum BetaStrategyConfig {
    MeanProfile,
    HalfMax,
}

impl From<BetaStrategyConfig> for BetaStrategy {
    fn from(s: BetaStrategyConfig) -> Self {
        match s {
            BetaStrategyConfig::MeanProfile => BetaStrategy::MeanProfile,
            BetaStrategyConfig::HalfMax => BetaStrategy::HalfMax,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizerSettings {
    pub beta_strategy: BetaStrategyConfig,
    pub snr_min_db: f64,
    pub a_max_mhz: f64,
    pub monitored_band_hz: (f64, f64),
}

impl Default for LocalizerSettings {
    fn default() -> Self {
        Self {
            beta_strategy: BetaStrategyConfig::MeanProfile,
            snr_min_db: -15.0,
            a_max_mhz: 10.0,
            monitored_band_hz: (0.1, 1.0),
        }
    }
}

impl LocalizerSettings {
    pub fn build(&self, reference_model: Option<ArmaModel>) -> LocalizerConfig {
        LocalizerConfig {
            beta_strategy: self.beta_strategy.into(),
            snr_min_db: self.snr_min_db,
            a_max_mhz: self.a_max_mhz,
            monitored_band_hz: self.monitored_band_hz,
            reference_model,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineSettings {
    pub n_max_cp: usize,
    pub min_segment_seconds: f64,
    pub alpha: f64,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            n_max_cp: 10,
            min_segment_seconds: 120.0,
            alpha: 0.7,
        }
    }
}

impl BaselineSettings {
    pub fn min_segment_samples(&self, sample_rate_hz: f64) -> usize {
        (self.min_segment_seconds * sample_rate_hz).round().max(1.0) as usize
    }
}

/// Full benchmark description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub model: ModelConfig,
    pub n_samples: usize,
    pub fo: FoTruthConfig,
    pub snr_grid_db: Vec<f64>,
    pub trials_per_point: usize,
    pub seed_base: u64,
    pub localizer: LocalizerSettings,
    pub baseline: BaselineSettings,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            model: ModelConfig::default(),
            n_samples: 4500,
            fo: FoTruthConfig::default(),
            snr_grid_db: vec![-15.0, -10.0, -5.0, 0.0, 5.0, 10.0],
            trials_per_point: 300,
            seed_base: 31_415_926,
            localizer: LocalizerSettings::default(),
            baseline: BaselineSettings::default(),
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            bail!(
                "unsupported config version {} (this build reads version {CONFIG_VERSION})",
                self.version
            );
        }
        if self.trials_per_point == 0 {
            bail!("trials_per_point must be >= 1");
        }
        if self.snr_grid_db.is_empty() {
            bail!("snr_grid_db must not be empty");
        }
        if self.n_samples < 64 {
            bail!("n_samples must be >= 64");
        }
        if self.fo.start_sample > self.fo.end_sample || self.fo.end_sample >= self.n_samples {
            bail!(
                "fo span [{}, {}] outside record of length {}",
                self.fo.start_sample,
                self.fo.end_sample,
                self.n_samples
            );
        }
        self.model.build().context("model config invalid")?;
        Ok(())
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex digest of the canonical JSON form, with execution-only fields
    /// (worker count) zeroed so results from different machines compare
    /// equal. Stamped into output files.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = 0;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let json = cfg.to_json();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(back.n_samples, 4500);
        assert_eq!(back.fo.start_sample, 1535);
        assert_eq!(back.fo.end_sample, 3334);
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ExperimentConfig::default();
        let mut b = ExperimentConfig::default();
        b.trials_per_point = 7;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.snr_grid_db.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.fo.end_sample = 10_000;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.version = 99;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn baseline_minutes_convert_to_samples() {
        let b = BaselineSettings::default();
        assert_eq!(b.min_segment_samples(3.0), 360);
    }
}
