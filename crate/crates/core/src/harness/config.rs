//! The JSON run-config: one document with `data`, `preprocess`, `model`,
//! `hyper` and `run` sections. Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, Hyperparams, Result};
use crate::data_io::{read_eegb, EEGDataset};
use crate::model::ModelConfig;
use crate::preprocess::PreprocessConfig;
use crate::synthgen::{generate_dataset, SynthSpec};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// An EEGB file; relative paths resolve against the config file.
    pub path: Option<PathBuf>,
    /// Generate the dataset instead of reading one.
    pub synth: Option<SynthSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Cv,
    Holdout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classifier {
    Clmi,
    CspLda,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub mode: SplitMode,
    pub folds: usize,
    pub train_fraction: f64,
    /// Sliding-window augmentation of training trials, with majority voting
    /// over the windows of each test trial. Off: every trial is cropped to
    /// its first window.
    pub augment: bool,
    pub classifier: Classifier,
    pub csp_filters_per_end: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: SplitMode::Cv,
            folds: 5,
            train_fraction: 0.8,
            augment: true,
            classifier: Classifier::Clmi,
            csp_filters_per_end: 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub preprocess: PreprocessConfig,
    pub model: ModelConfig,
    pub hyper: Hyperparams,
    pub run: RunSection,
}

impl RunConfig {
    /// Desk-scale profile: a synthetic 4-class, 8-channel set of 200-sample
    /// trials, 100-sample windows packed 10×10, and the reduced model.
    pub fn ci() -> Self {
        Self {
            data: DataSection {
                path: None,
                synth: Some(SynthSpec {
                    n_trials_per_class: 50,
                    n_channels: 8,
                    n_samples: 200,
                    noise_scale: 0.2,
                    erd_depth: 0.8,
                    ..SynthSpec::default()
                }),
            },
            preprocess: PreprocessConfig {
                window_samples: 100,
                window_stride_samples: 25,
                n_windows: 5,
                volume_h: 10,
                volume_w: 10,
                ..PreprocessConfig::default()
            },
            model: ModelConfig::ci(),
            hyper: Hyperparams {
                lr0: 3e-3,
                batch_size: 16,
                epochs: 15,
                ..Hyperparams::default()
            },
            run: RunSection {
                augment: false,
                ..RunSection::default()
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a config file; a relative `data.path` is resolved against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let (Some(p), Some(dir)) = (&cfg.data.path, path.parent()) {
            if p.is_relative() {
                cfg.data.path = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads or generates the dataset named by the `data` section.
    pub fn dataset(&self) -> Result<EEGDataset> {
        match (&self.data.path, &self.data.synth) {
            (Some(p), None) => Ok(read_eegb(p)?),
            (None, Some(spec)) => Ok(generate_dataset(spec)?),
            _ => Err(HarnessError::Config(
                "data needs exactly one of `path` and `synth`".into(),
            )),
        }
    }

    /// Checks the sections against each other and against the dataset. The
    /// model section is only checked when the network is the classifier.
    pub fn validate(&self, dataset: &EEGDataset) -> Result<()> {
        self.preprocess.validate(dataset.n_samples, dataset.fs)?;
        if self.run.mode == SplitMode::Cv && self.run.folds < 2 {
            return Err(HarnessError::Config("run.folds must be at least 2".into()));
        }
        if self.run.classifier == Classifier::CspLda {
            return Ok(());
        }
        self.hyper.validate()?;
        self.model.validate()?;
        let want = [self.preprocess.volume_h, self.preprocess.volume_w, dataset.n_channels];
        if self.model.input_dims != want {
            return Err(HarnessError::Config(format!(
                "model.input_dims {:?} must equal (volume_h, volume_w, n_channels) = {want:?}",
                self.model.input_dims
            )));
        }
        if self.model.n_classes != dataset.n_classes {
            return Err(HarnessError::Config(format!(
                "model.n_classes {} but dataset has {} classes",
                self.model.n_classes, dataset.n_classes
            )));
        }
        Ok(())
    }
}
