//! The JSON experiment configuration consumed by the CLI.
//!
//! One document declares the dataset source (a CSV path or an inline
//! generator config), preprocessing, augmentation, contrast parameters, the
//! model architecture, and the training settings. Outputs echo the full
//! config into a sidecar for reproducibility.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{StrongAugConfig, WeakAugConfig};
use crate::error::{Error, Result};
use crate::losses::ContrastConfig;
use crate::model::ArchitectureConfig;
use crate::spectra::PreprocessConfig;
use crate::synth::SynthConfig;
use crate::train::TrainMode;

/// Exactly one source: a labelled CSV on disk or an inline generator config.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Csv(PathBuf),
    Synth(SynthConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub weak: WeakAugConfig,
    pub strong: StrongAugConfig,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { weak: WeakAugConfig::default(), strong: StrongAugConfig::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub mode: TrainMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Fraction of the training corpus kept annotated (stratified).
    pub annotation_fraction: f64,
    /// Category-head width; derived from the labels when absent. Required
    /// for fully unlabeled corpora.
    pub class_count: Option<usize>,
    pub seed: u64,
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            mode: TrainMode::Semi,
            epochs: 100,
            batch_size: 32,
            lr: 1e-3,
            annotation_fraction: 0.05,
            class_count: None,
            seed: 0,
            checkpoint_path: PathBuf::from("scdc.ckpt"),
            log_path: PathBuf::from("scdc-train.jsonl"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub contrast: ContrastConfig,
    #[serde(default)]
    pub model: ArchitectureConfig,
    #[serde(default)]
    pub train: TrainSettings,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.contrast.validate()?;
        self.augment.weak.validate()?;
        if let DatasetSource::Synth(synth) = &self.dataset {
            synth.validate()?;
        }
        if !(self.train.annotation_fraction > 0.0 && self.train.annotation_fraction <= 1.0) {
            return Err(Error::config("annotation_fraction must be in (0, 1]"));
        }
        if self.train.batch_size < 2 {
            return Err(Error::config("batch_size must be >= 2"));
        }
        if self.train.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        Ok(())
    }

    /// The trainer-facing view of this config.
    pub fn train_config(&self) -> crate::train::TrainConfig {
        crate::train::TrainConfig {
            mode: self.train.mode,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            lr: self.train.lr,
            contrast: self.contrast.clone(),
            weak_aug: self.augment.weak.clone(),
            strong_aug: self.augment.strong.clone(),
            architecture: self.model.clone(),
            seed: self.train.seed,
            checkpoint_path: Some(self.train.checkpoint_path.clone()),
            log_path: Some(self.train.log_path.clone()),
        }
    }
}
