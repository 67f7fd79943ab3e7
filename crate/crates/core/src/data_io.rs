//! Labeled trial datasets, the EEGB container format and reproducible splits.
//!
//! EEGB v1 (little-endian):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "EEGB"
//!      4     4  version (u32) = 1
//!      8     4  n_trials (u32)
//!     12     4  n_channels (u32)
//!     16     4  n_samples (u32)
//!     20     4  n_classes (u32)
//!     24     4  fs (f32, Hz)
//!     28     4  reserved = 0
//!     32     n  one u8 label per trial, zero padded to a multiple of 4
//!      …        f32 samples, index ((t * n_channels + c) * n_samples + s)
//! ```
//!
//! Samples are held as `f64` in memory and stored as `f32`, so a dataset
//! survives a write/read cycle bit for bit when its samples are representable
//! in single precision (anything read from a file, or produced by
//! [`crate::synthgen`]).
//!
//! A converter from BCI Competition IV 2a GDF files should emit the 22 EEG
//! channels, the 4 s motor-imagery segment at 250 Hz (1000 samples) and labels
//! 0–3 for left hand, right hand, feet and tongue.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const EEGB_MAGIC: &[u8; 4] = b"EEGB";
pub const EEGB_VERSION: u32 = 1;
pub const EEGB_HEADER_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("not an EEGB file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported EEGB version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("label {label} of trial {trial} is not below n_classes = {n_classes}")]
    LabelOutOfRange {
        trial: usize,
        label: usize,
        n_classes: usize,
    },
    #[error("class {class} has {count} trials, need at least {needed}")]
    TooFewSamplesPerClass { class: usize, count: usize, needed: usize },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("I/O failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// One trial: `n_channels` rows of `n_samples` values (µV), channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    n_channels: usize,
    n_samples: usize,
    data: Vec<f64>,
}

impl Trial {
    pub fn new(n_channels: usize, n_samples: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_channels * n_samples {
            return Err(DataError::Invalid(format!(
                "{n_channels}x{n_samples} trial given {} values",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Invalid(format!("non-finite sample at flat index {i}")));
        }
        Ok(Self {
            n_channels,
            n_samples,
            data,
        })
    }

    /// Builds a trial from per-channel rows of equal length.
    pub fn from_channels(rows: &[Vec<f64>]) -> Result<Self> {
        let n_samples = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_samples) {
            return Err(DataError::Invalid("ragged channel rows".into()));
        }
        Self::new(rows.len(), n_samples, rows.concat())
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn at(&self, c: usize, s: usize) -> f64 {
        self.data[c * self.n_samples + s]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Samples `[start, start + len)` of every channel.
    pub fn slice_samples(&self, start: usize, len: usize) -> Trial {
        let mut data = Vec::with_capacity(self.n_channels * len);
        for c in 0..self.n_channels {
            data.extend_from_slice(&self.channel(c)[start..start + len]);
        }
        Trial {
            n_channels: self.n_channels,
            n_samples: len,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EEGDataset {
    pub trials: Vec<Trial>,
    pub labels: Vec<usize>,
    pub fs: f64,
    pub n_channels: usize,
    pub n_samples: usize,
    pub n_classes: usize,
    pub channel_names: Option<Vec<String>>,
}

impl EEGDataset {
    pub fn new(
        trials: Vec<Trial>,
        labels: Vec<usize>,
        fs: f64,
        n_channels: usize,
        n_samples: usize,
        n_classes: usize,
    ) -> Result<Self> {
        let d = Self {
            trials,
            labels,
            fs,
            n_channels,
            n_samples,
            n_classes,
            channel_names: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(DataError::Invalid(format!(
                "sampling rate {} must be positive",
                self.fs
            )));
        }
        if self.n_classes == 0 {
            return Err(DataError::Invalid("n_classes must be positive".into()));
        }
        if self.labels.len() != self.trials.len() {
            return Err(DataError::Invalid(format!(
                "{} labels for {} trials",
                self.labels.len(),
                self.trials.len()
            )));
        }
        for (i, t) in self.trials.iter().enumerate() {
            if t.n_channels != self.n_channels || t.n_samples != self.n_samples {
                return Err(DataError::Invalid(format!(
                    "trial {i} is {}x{}, dataset is {}x{}",
                    t.n_channels, t.n_samples, self.n_channels, self.n_samples
                )));
            }
        }
        if let Some((trial, &label)) = self.labels.iter().enumerate().find(|(_, &l)| l >= self.n_classes) {
            return Err(DataError::LabelOutOfRange {
                trial,
                label,
                n_classes: self.n_classes,
            });
        }
        if let Some(names) = &self.channel_names {
            if names.len() != self.n_channels {
                return Err(DataError::Invalid(format!(
                    "{} channel names for {} channels",
                    names.len(),
                    self.n_channels
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// The trials at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> EEGDataset {
        EEGDataset {
            trials: indices.iter().map(|&i| self.trials[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ..self.with_trials(Vec::new(), Vec::new())
        }
    }

    /// Same metadata with replacement trials (whose shape may differ).
    pub fn with_trials(&self, trials: Vec<Trial>, labels: Vec<usize>) -> EEGDataset {
        let (n_channels, n_samples) = trials
            .first()
            .map_or((self.n_channels, self.n_samples), |t| (t.n_channels, t.n_samples));
        EEGDataset {
            trials,
            labels,
            fs: self.fs,
            n_channels,
            n_samples,
            n_classes: self.n_classes,
            channel_names: self.channel_names.clone(),
        }
    }
}

/// Size in bytes of an EEGB file with the given dimensions.
pub fn eegb_file_len(n_trials: usize, n_channels: usize, n_samples: usize) -> u64 {
    let labels = n_trials.div_ceil(4) * 4;
    (EEGB_HEADER_LEN + labels) as u64 + 4 * (n_trials * n_channels * n_samples) as u64
}

pub fn encode_eegb<W: Write>(dataset: &EEGDataset, mut w: W) -> Result<()> {
    dataset.validate()?;
    if dataset.n_classes > 256 {
        return Err(DataError::Invalid("EEGB labels are u8; at most 256 classes".into()));
    }
    let to_u32 =
        |v: usize, what: &str| u32::try_from(v).map_err(|_| DataError::Invalid(format!("{what} = {v} exceeds u32")));
    w.write_all(EEGB_MAGIC)?;
    w.write_all(&EEGB_VERSION.to_le_bytes())?;
    w.write_all(&to_u32(dataset.len(), "n_trials")?.to_le_bytes())?;
    w.write_all(&to_u32(dataset.n_channels, "n_channels")?.to_le_bytes())?;
    w.write_all(&to_u32(dataset.n_samples, "n_samples")?.to_le_bytes())?;
    w.write_all(&to_u32(dataset.n_classes, "n_classes")?.to_le_bytes())?;
    w.write_all(&(dataset.fs as f32).to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    let mut labels: Vec<u8> = dataset.labels.iter().map(|&l| l as u8).collect();
    labels.resize(dataset.len().div_ceil(4) * 4, 0);
    w.write_all(&labels)?;
    for t in &dataset.trials {
        for &v in &t.data {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn decode_eegb<R: Read>(mut r: R) -> Result<EEGDataset> {
    let mut header = [0u8; EEGB_HEADER_LEN];
    let got = read_up_to(&mut r, &mut header)?;
    if got >= 4 && &header[..4] != EEGB_MAGIC {
        return Err(DataError::BadMagic(header[..4].try_into().expect("4 bytes")));
    }
    if got < EEGB_HEADER_LEN {
        return Err(DataError::TruncatedPayload {
            expected: EEGB_HEADER_LEN as u64,
            found: got as u64,
        });
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != EEGB_VERSION {
        return Err(DataError::UnsupportedVersion(version));
    }
    let (n_trials, n_channels, n_samples, n_classes) = (
        u32_at(8) as usize,
        u32_at(12) as usize,
        u32_at(16) as usize,
        u32_at(20) as usize,
    );
    let fs = f32::from_le_bytes(header[24..28].try_into().expect("4 bytes")) as f64;

    let expected = eegb_file_len(n_trials, n_channels, n_samples);
    let mut labels = vec![0u8; n_trials.div_ceil(4) * 4];
    let got_labels = read_up_to(&mut r, &mut labels)?;
    let per_trial = n_channels * n_samples;
    let mut trials = Vec::with_capacity(n_trials.min(1 << 16));
    let mut found = (EEGB_HEADER_LEN + got_labels) as u64;
    if got_labels == labels.len() {
        let mut buf = vec![0u8; per_trial * 4];
        for _ in 0..n_trials {
            let n = read_up_to(&mut r, &mut buf)?;
            found += n as u64;
            if n < buf.len() {
                break;
            }
            let data = buf
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                .collect();
            trials.push(Trial::new(n_channels, n_samples, data)?);
        }
    }
    if found < expected {
        return Err(DataError::TruncatedPayload { expected, found });
    }
    let labels: Vec<usize> = labels[..n_trials].iter().map(|&l| l as usize).collect();
    EEGDataset::new(trials, labels, fs, n_channels, n_samples, n_classes)
}

fn read_up_to<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

pub fn write_eegb(dataset: &EEGDataset, path: impl AsRef<Path>) -> Result<()> {
    encode_eegb(dataset, BufWriter::new(File::create(path)?))
}

pub fn read_eegb(path: impl AsRef<Path>) -> Result<EEGDataset> {
    decode_eegb(BufReader::new(File::open(path)?))
}

/// In-place Fisher–Yates shuffle drawing `j ∈ [0, i]` from `rng`.
pub(crate) fn fisher_yates<T, R: Rng + ?Sized>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Trial indices of each class, in dataset order.
fn indices_by_class(dataset: &EEGDataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); dataset.n_classes];
    for (i, &l) in dataset.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    by_class
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold index of every trial.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    /// `(train, test)` trial indices for `fold`, each in ascending order.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.assignments.len()).partition(|&i| self.assignments[i] != fold)
    }
}

/// Stratified `k`-fold assignment.
///
/// Each class's trial indices are shuffled (Fisher–Yates, ChaCha8 seeded with
/// `seed`, classes visited in id order) and dealt round-robin onto the folds.
/// The deal for each class starts where the previous class stopped, so fold
/// sizes also differ by at most one.
pub fn stratified_folds(dataset: &EEGDataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 {
        return Err(DataError::Invalid("k must be positive".into()));
    }
    let by_class = indices_by_class(dataset);
    for (class, idx) in by_class.iter().enumerate() {
        if idx.len() < k {
            return Err(DataError::TooFewSamplesPerClass {
                class,
                count: idx.len(),
                needed: k,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; dataset.len()];
    let mut offset = 0;
    for mut idx in by_class {
        fisher_yates(&mut idx, &mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            assignments[i] = (offset + pos) % k;
        }
        offset += idx.len();
    }
    Ok(FoldPlan { k, assignments, seed })
}

/// Stratified train/test indices: `round(train_fraction · n_c)` training
/// trials per class, clamped so both sides keep at least one trial.
pub fn holdout_indices(dataset: &EEGDataset, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Invalid(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut idx) in indices_by_class(dataset).into_iter().enumerate() {
        if idx.len() < 2 {
            return Err(DataError::TooFewSamplesPerClass {
                class,
                count: idx.len(),
                needed: 2,
            });
        }
        fisher_yates(&mut idx, &mut rng);
        let n_train = ((train_fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn holdout_split(dataset: &EEGDataset, train_fraction: f64, seed: u64) -> Result<(EEGDataset, EEGDataset)> {
    let (train, test) = holdout_indices(dataset, train_fraction, seed)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}
