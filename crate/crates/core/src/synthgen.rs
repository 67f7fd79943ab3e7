//! Synthetic motor-imagery EEG with class-dependent ERD/ERS.
//!
//! Every channel carries 1/f background noise plus an alpha and a beta
//! rhythm of unit amplitude. On the channels mapped to a trial's class the
//! alpha rhythm is attenuated by `erd_depth` and the beta rhythm boosted by
//! `ers_gain`, for the whole trial.
//!
//! Trial `i` draws from its own ChaCha8 stream (`seed`, stream `i`), so
//! trials can be generated in any order with identical results. Samples are
//! rounded to `f32` so a dataset survives an EEGB round trip unchanged.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_io::{EEGDataset, Trial};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("bad synth spec: {0}")]
    BadSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_trials_per_class: usize,
    pub n_channels: usize,
    pub n_samples: usize,
    pub fs: f64,
    pub n_classes: usize,
    pub alpha_hz: f64,
    pub beta_hz: f64,
    pub erd_depth: f64,
    pub ers_gain: f64,
    pub noise_scale: f64,
    /// Channels affected by each class. Empty means [`SynthSpec::spread_map`].
    pub class_channel_map: Vec<Vec<usize>>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_trials_per_class: 50,
            n_channels: 8,
            n_samples: 1000,
            fs: 250.0,
            n_classes: 4,
            alpha_hz: 10.0,
            beta_hz: 22.0,
            erd_depth: 0.8,
            ers_gain: 0.0,
            noise_scale: 0.2,
            class_channel_map: Vec::new(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Splits the channels into contiguous, equally sized blocks, one per class.
    pub fn spread_map(n_classes: usize, n_channels: usize) -> Vec<Vec<usize>> {
        let per = (n_channels / n_classes.max(1)).max(1);
        (0..n_classes)
            .map(|c| (c * per..(c + 1) * per).filter(|&ch| ch < n_channels).collect())
            .collect()
    }

    pub fn channel_map(&self) -> Vec<Vec<usize>> {
        if self.class_channel_map.is_empty() {
            Self::spread_map(self.n_classes, self.n_channels)
        } else {
            self.class_channel_map.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::BadSpec(m));
        if self.n_channels == 0 || self.n_samples == 0 || self.n_classes == 0 {
            return bad("channels, samples and classes must be positive".into());
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return bad(format!("sampling rate {} must be positive", self.fs));
        }
        if !(8.0..=14.0).contains(&self.alpha_hz) {
            return bad(format!("alpha_hz {} outside 8-14 Hz", self.alpha_hz));
        }
        if !(15.0..=30.0).contains(&self.beta_hz) {
            return bad(format!("beta_hz {} outside 15-30 Hz", self.beta_hz));
        }
        if self.beta_hz >= self.fs / 2.0 {
            return bad(format!("beta_hz {} above Nyquist", self.beta_hz));
        }
        if !(0.0..=1.0).contains(&self.erd_depth) {
            return bad(format!("erd_depth {} outside [0, 1]", self.erd_depth));
        }
        if !(self.ers_gain >= 0.0 && self.ers_gain.is_finite()) {
            return bad(format!("ers_gain {} must be non-negative", self.ers_gain));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad(format!("noise_scale {} must be non-negative", self.noise_scale));
        }
        let map = self.channel_map();
        if map.len() != self.n_classes {
            return bad(format!(
                "channel map has {} classes, spec has {}",
                map.len(),
                self.n_classes
            ));
        }
        if let Some(&ch) = map.iter().flatten().find(|&&ch| ch >= self.n_channels) {
            return bad(format!("mapped channel {ch} >= n_channels {}", self.n_channels));
        }
        Ok(())
    }
}

/// Zero-mean noise with a 1/sqrt(f) amplitude spectrum (flat below 1 Hz, no
/// DC), scaled to unit standard deviation.
fn pink_noise(rng: &mut ChaCha8Rng, n: usize, fs: f64, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    for (k, v) in buf.iter_mut().enumerate().skip(1) {
        let f = k.min(n - k) as f64 * fs / n as f64;
        *v /= f.max(1.0).sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if sd == 0.0 {
        return vec![0.0; n];
    }
    x.iter().map(|v| (v - mean) / sd).collect()
}

/// Generates `n_classes · n_trials_per_class` trials; trial `i` has label
/// `i mod n_classes`.
pub fn generate_dataset(spec: &SynthSpec) -> Result<EEGDataset, SynthError> {
    spec.validate()?;
    let map = spec.channel_map();
    let n_trials = spec.n_classes * spec.n_trials_per_class;
    let mut planner = FftPlanner::new();
    let mut trials = Vec::with_capacity(n_trials);
    let mut labels = Vec::with_capacity(n_trials);
    for i in 0..n_trials {
        let label = i % spec.n_classes;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let mut data = Vec::with_capacity(spec.n_channels * spec.n_samples);
        for ch in 0..spec.n_channels {
            let mapped = map[label].contains(&ch);
            let alpha = if mapped { 1.0 - spec.erd_depth } else { 1.0 };
            let beta = if mapped { 1.0 + spec.ers_gain } else { 1.0 };
            let pa = rng.random_range(0.0..2.0 * PI);
            let pb = rng.random_range(0.0..2.0 * PI);
            let noise = pink_noise(&mut rng, spec.n_samples, spec.fs, &mut planner);
            for (s, nz) in noise.into_iter().enumerate() {
                let t = s as f64 / spec.fs;
                let v = alpha * (2.0 * PI * spec.alpha_hz * t + pa).sin()
                    + beta * (2.0 * PI * spec.beta_hz * t + pb).sin()
                    + spec.noise_scale * nz;
                data.push(v as f32 as f64);
            }
        }
        trials.push(Trial::new(spec.n_channels, spec.n_samples, data).map_err(|e| SynthError::BadSpec(e.to_string()))?);
        labels.push(label);
    }
    EEGDataset::new(trials, labels, spec.fs, spec.n_channels, spec.n_samples, spec.n_classes)
        .map_err(|e| SynthError::BadSpec(e.to_string()))
}
