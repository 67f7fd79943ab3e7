//! Trial preprocessing: common average reference, zero-phase bandpass,
//! sliding-window augmentation and packing of a window into a voxel grid.

pub mod filter;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_io::{EEGDataset, Trial};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("common average reference needs at least 2 channels")]
    SingleChannel,
    #[error("invalid band {lo}..{hi} Hz at fs = {fs} Hz (order {order})")]
    InvalidBand { lo: f64, hi: f64, fs: f64, order: usize },
    #[error("windows need {needed} samples, trial has {available}")]
    WindowOverrun { needed: usize, available: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, PreprocessError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub band_lo: f64,
    pub band_hi: f64,
    pub filter_order: usize,
    pub window_samples: usize,
    pub window_stride_samples: usize,
    pub n_windows: usize,
    pub volume_h: usize,
    pub volume_w: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            band_lo: 8.0,
            band_hi: 30.0,
            filter_order: 4,
            window_samples: 900,
            window_stride_samples: 25,
            n_windows: 5,
            volume_h: 30,
            volume_w: 30,
        }
    }
}

impl PreprocessConfig {
    pub fn check_band(&self, fs: f64) -> Result<()> {
        let ok = self.band_lo > 0.0 && self.band_lo < self.band_hi && self.band_hi < fs / 2.0 && self.filter_order >= 1;
        if ok {
            Ok(())
        } else {
            Err(PreprocessError::InvalidBand {
                lo: self.band_lo,
                hi: self.band_hi,
                fs,
                order: self.filter_order,
            })
        }
    }

    pub fn check_volume(&self) -> Result<()> {
        if self.window_samples != self.volume_h * self.volume_w || self.window_samples == 0 {
            return Err(PreprocessError::ShapeMismatch(format!(
                "window of {} samples cannot fill a {}x{} grid",
                self.window_samples, self.volume_h, self.volume_w
            )));
        }
        Ok(())
    }

    /// Samples spanned by all windows.
    pub fn span(&self) -> usize {
        self.window_samples + self.n_windows.saturating_sub(1) * self.window_stride_samples
    }

    pub fn check_windows(&self, n_samples: usize) -> Result<()> {
        if self.n_windows == 0 || self.window_samples == 0 {
            return Err(PreprocessError::ShapeMismatch("empty window plan".into()));
        }
        if self.span() > n_samples {
            return Err(PreprocessError::WindowOverrun {
                needed: self.span(),
                available: n_samples,
            });
        }
        Ok(())
    }

    /// Every invariant against a trial shape and sampling rate.
    pub fn validate(&self, n_samples: usize, fs: f64) -> Result<()> {
        self.check_band(fs)?;
        self.check_volume()?;
        self.check_windows(n_samples)
    }
}

/// Subtracts the across-channel mean at every time point.
pub fn car_filter(trial: &Trial) -> Result<Trial> {
    let (c, n) = (trial.n_channels(), trial.n_samples());
    if c < 2 {
        return Err(PreprocessError::SingleChannel);
    }
    let mut mean = vec![0.0; n];
    for ch in 0..c {
        mean.iter_mut().zip(trial.channel(ch)).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= c as f64);
    let mut out = trial.clone();
    for ch in 0..c {
        out.channel_mut(ch).iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
    }
    Ok(out)
}

/// Per-channel zero-phase Butterworth bandpass.
pub fn bandpass(trial: &Trial, cfg: &PreprocessConfig, fs: f64) -> Result<Trial> {
    cfg.check_band(fs)?;
    let sos = filter::butter_bandpass(cfg.filter_order, cfg.band_lo, cfg.band_hi, fs);
    let mut out = trial.clone();
    for ch in 0..trial.n_channels() {
        let y = filter::filtfilt(&sos, trial.channel(ch), 3 * cfg.filter_order);
        out.channel_mut(ch).copy_from_slice(&y);
    }
    Ok(out)
}

/// `n_windows` sub-trials; window `w` covers `[w·stride, w·stride + window_samples)`.
pub fn sliding_window_augment(trial: &Trial, cfg: &PreprocessConfig) -> Result<Vec<Trial>> {
    cfg.check_windows(trial.n_samples())?;
    Ok((0..cfg.n_windows)
        .map(|w| trial.slice_samples(w * cfg.window_stride_samples, cfg.window_samples))
        .collect())
}

/// The first window only, `[0, window_samples)`.
pub fn first_window(trial: &Trial, cfg: &PreprocessConfig) -> Result<Trial> {
    if cfg.window_samples == 0 || cfg.window_samples > trial.n_samples() {
        return Err(PreprocessError::WindowOverrun {
            needed: cfg.window_samples,
            available: trial.n_samples(),
        });
    }
    Ok(trial.slice_samples(0, cfg.window_samples))
}

/// One window packed as an `(h, w, channels)` grid, channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    h: usize,
    w: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Volume3D {
    pub fn new(h: usize, w: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != h * w * channels {
            return Err(PreprocessError::ShapeMismatch(format!(
                "{h}x{w}x{channels} volume given {} values",
                data.len()
            )));
        }
        Ok(Self { h, w, channels, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.channels)
    }

    pub fn at(&self, r: usize, c: usize, ch: usize) -> f64 {
        self.data[(r * self.w + c) * self.channels + ch]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// `volume[r][c][ch] = trial[ch][r·W + c]`.
pub fn to_volume(trial: &Trial, cfg: &PreprocessConfig) -> Result<Volume3D> {
    let (h, w) = (cfg.volume_h, cfg.volume_w);
    if trial.n_samples() != h * w {
        return Err(PreprocessError::ShapeMismatch(format!(
            "{} samples do not fill a {h}x{w} grid",
            trial.n_samples()
        )));
    }
    let c = trial.n_channels();
    let mut data = vec![0.0; h * w * c];
    for ch in 0..c {
        for (t, &v) in trial.channel(ch).iter().enumerate() {
            data[t * c + ch] = v;
        }
    }
    Volume3D::new(h, w, c, data)
}

/// Unrolls a volume to `(h·w, channels)` rows: `seq[t][ch] = volume[t / W][t % W][ch]`.
pub fn to_sequence(volume: &Volume3D) -> Vec<Vec<f64>> {
    volume.data.chunks_exact(volume.channels).map(<[f64]>::to_vec).collect()
}

/// CAR, bandpass, then windowing. With `augment`, every trial becomes
/// `n_windows` windows (kept adjacent, label inherited); otherwise each trial
/// is cropped to its first window.
pub fn preprocess_pipeline(dataset: &EEGDataset, cfg: &PreprocessConfig, augment: bool) -> Result<EEGDataset> {
    let filtered = filter_trials(dataset, cfg)?;
    window_dataset(&filtered, cfg, augment)
}

/// CAR followed by bandpass on every trial; shapes are unchanged.
pub fn filter_trials(dataset: &EEGDataset, cfg: &PreprocessConfig) -> Result<EEGDataset> {
    cfg.check_band(dataset.fs)?;
    let trials = dataset
        .trials
        .iter()
        .map(|t| bandpass(&car_filter(t)?, cfg, dataset.fs))
        .collect::<Result<Vec<_>>>()?;
    Ok(dataset.with_trials(trials, dataset.labels.clone()))
}

/// Windowing stage of [`preprocess_pipeline`].
pub fn window_dataset(dataset: &EEGDataset, cfg: &PreprocessConfig, augment: bool) -> Result<EEGDataset> {
    let mut trials = Vec::new();
    let mut labels = Vec::new();
    for (t, &label) in dataset.trials.iter().zip(&dataset.labels) {
        if augment {
            for w in sliding_window_augment(t, cfg)? {
                trials.push(w);
                labels.push(label);
            }
        } else {
            trials.push(first_window(t, cfg)?);
            labels.push(label);
        }
    }
    let mut out = dataset.with_trials(trials, labels);
    out.n_samples = cfg.window_samples;
    Ok(out)
}
