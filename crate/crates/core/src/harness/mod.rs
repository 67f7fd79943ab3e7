//! Training loop, cross-validation, ablation and sweep drivers, feature
//! export and the metrics report.
//!
//! Per fold: trials are CAR-referenced and bandpassed (trial-local, so this
//! happens once, before splitting), split at the trial level, then windowed.
//! Windows inherit their trial's id, which is how the train/test disjointness
//! is checked and how test windows are voted back into one prediction.

pub mod config;
pub mod metrics;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use clmi_autodiff::{AutodiffError, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline_csp::{CspError, CspLda};
use crate::data_io::{fisher_yates, holdout_indices, stratified_folds, DataError, EEGDataset, Trial};
use crate::model::{build_ablation_suite, Model, ModelConfig, ModelError};
use crate::preprocess::{
    filter_trials, first_window, sliding_window_augment, to_volume, PreprocessConfig, PreprocessError,
};
use crate::synthgen::SynthError;

pub use config::{Classifier, RunConfig, SplitMode};
pub use metrics::{macro_f1, micro_f1, Confusion, Metrics};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] DataError),
    #[error("preprocessing: {0}")]
    Preprocess(#[from] PreprocessError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("synthetic data: {0}")]
    Synth(#[from] SynthError),
    #[error("baseline: {0}")]
    Csp(#[from] CspError),
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("empty test set")]
    EmptyTestSet,
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 2 config, 3 data, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Synth(_) => 2,
            HarnessError::Preprocess(_) => 2,
            HarnessError::Model(ModelError::BadConfig(_) | ModelError::ShapeMismatch(_)) => 2,
            HarnessError::Model(ModelError::Autodiff(AutodiffError::BadSpec(_))) => 2,
            HarnessError::Model(ModelError::Checkpoint(_)) => 3,
            HarnessError::Model(ModelError::Autodiff(AutodiffError::Checkpoint(_) | AutodiffError::Io(_))) => 3,
            HarnessError::Data(_) | HarnessError::EmptyTestSet | HarnessError::Io(_) => 3,
            HarnessError::Model(_) | HarnessError::Csp(_) | HarnessError::NumericFailure(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub lr0: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lr0: 0.001,
            lr_decay_factor: 0.7,
            lr_decay_every: 10,
            batch_size: 64,
            epochs: 100,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(HarnessError::Config(format!("lr0 {} must be positive", self.lr0)));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(HarnessError::Config(format!(
                "lr_decay_factor {} outside (0, 1]",
                self.lr_decay_factor
            )));
        }
        if self.lr_decay_every == 0 || self.batch_size == 0 {
            return Err(HarnessError::Config(
                "lr_decay_every and batch_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `lr0 · factor^⌊epoch / every⌋`.
pub fn lr_at(epoch: usize, hp: &Hyperparams) -> f64 {
    hp.lr0 * hp.lr_decay_factor.powi((epoch / hp.lr_decay_every) as i32)
}

/// Model-ready windows with their labels and source-trial ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    /// `(H, W, C)` of one volume.
    pub dims: [usize; 3],
    data: Vec<f64>,
    pub labels: Vec<usize>,
    pub trial_ids: Vec<usize>,
}

impl Samples {
    /// Windows the trials at `indices` of an already filtered dataset. With
    /// `augment`, each trial yields `n_windows` adjacent samples; otherwise
    /// its first window only.
    pub fn build(filtered: &EEGDataset, indices: &[usize], pre: &PreprocessConfig, augment: bool) -> Result<Self> {
        let dims = [pre.volume_h, pre.volume_w, filtered.n_channels];
        let mut s = Samples {
            dims,
            data: Vec::new(),
            labels: Vec::new(),
            trial_ids: Vec::new(),
        };
        for &i in indices {
            for w in windows(&filtered.trials[i], pre, augment)? {
                s.data.extend_from_slice(to_volume(&w, pre)?.data());
                s.labels.push(filtered.labels[i]);
                s.trial_ids.push(i);
            }
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn volume_len(&self) -> usize {
        self.dims.iter().product()
    }

    /// `(B, H, W, C)` tensor of the samples at `idx`.
    pub fn batch(&self, idx: &[usize]) -> Tensor {
        let v = self.volume_len();
        let mut data = Vec::with_capacity(idx.len() * v);
        for &i in idx {
            data.extend_from_slice(&self.data[i * v..(i + 1) * v]);
        }
        let [h, w, c] = self.dims;
        Tensor::new(&[idx.len(), h, w, c], data).expect("batch shape")
    }

    /// Distinct trial ids in first-seen order.
    pub fn trials(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for &t in &self.trial_ids {
            if out.last() != Some(&t) && !out.contains(&t) {
                out.push(t);
            }
        }
        out
    }
}

fn windows(trial: &Trial, pre: &PreprocessConfig, augment: bool) -> Result<Vec<Trial>> {
    Ok(if augment {
        sliding_window_augment(trial, pre)?
    } else {
        vec![first_window(trial, pre)?]
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub loss: Vec<f64>,
    pub accuracy: Vec<f64>,
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Mini-batch batches of one epoch; a trailing batch of one sample is merged
/// into the previous batch (batch norm needs two rows).
fn epoch_batches(order: &[usize], batch: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = order.chunks(batch).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").extend(last);
    }
    out
}

/// Trains in place with Adam and per-epoch seeded shuffling. Returns the
/// per-epoch mean loss and training accuracy.
pub fn train(model: &mut Model, samples: &Samples, hp: &Hyperparams) -> Result<History> {
    hp.validate()?;
    let mut history = History::default();
    if hp.epochs == 0 {
        return Ok(history);
    }
    if samples.len() < 2 {
        return Err(HarnessError::Config(format!(
            "{} training samples, need at least 2",
            samples.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let k = model.config().n_classes;
    for epoch in 0..hp.epochs {
        fisher_yates(&mut order, &mut rng);
        let lr = lr_at(epoch, hp);
        let (mut loss_sum, mut correct) = (0.0, 0);
        for idx in epoch_batches(&order, hp.batch_size) {
            let labels: Vec<usize> = idx.iter().map(|&i| samples.labels[i]).collect();
            let pass = model.train_step(&samples.batch(&idx), &labels, lr, &mut rng)?;
            let loss = pass.loss.unwrap_or(f64::NAN);
            if !loss.is_finite() {
                return Err(HarnessError::NumericFailure(format!("loss {loss} at epoch {epoch}")));
            }
            loss_sum += loss * idx.len() as f64;
            correct += pass
                .logits
                .data()
                .chunks(k)
                .zip(&labels)
                .filter(|(row, &l)| argmax(row) == l)
                .count();
        }
        history.loss.push(loss_sum / samples.len() as f64);
        history.accuracy.push(correct as f64 / samples.len() as f64);
    }
    Ok(history)
}

const EVAL_BATCH: usize = 32;

/// Infer-mode argmax prediction of every sample (ties to the lowest class).
pub fn predict_samples(model: &mut Model, samples: &Samples) -> Result<Vec<usize>> {
    let k = model.config().n_classes;
    let mut out = Vec::with_capacity(samples.len());
    let all: Vec<usize> = (0..samples.len()).collect();
    for idx in all.chunks(EVAL_BATCH) {
        let logits = model.predict(&samples.batch(idx))?;
        if logits.data().iter().any(|v| !v.is_finite()) {
            return Err(HarnessError::NumericFailure("non-finite logits".into()));
        }
        out.extend(logits.data().chunks(k).map(argmax));
    }
    Ok(out)
}

/// Per-sample confusion and metrics.
pub fn evaluate(model: &mut Model, samples: &Samples) -> Result<(Confusion, Metrics)> {
    if samples.is_empty() {
        return Err(HarnessError::EmptyTestSet);
    }
    let preds = predict_samples(model, samples)?;
    let c = Confusion::from_pairs(model.config().n_classes, samples.labels.iter().copied().zip(preds));
    let m = Metrics::from_confusion(&c);
    Ok((c, m))
}

/// Majority vote of window predictions per trial; ties to the lowest class.
/// Returns `(trial id, true label, predicted label)` in first-seen order.
pub fn vote(samples: &Samples, preds: &[usize], n_classes: usize) -> Vec<(usize, usize, usize)> {
    samples
        .trials()
        .into_iter()
        .map(|t| {
            let mut votes = vec![0usize; n_classes];
            let mut label = 0;
            for i in (0..samples.len()).filter(|&i| samples.trial_ids[i] == t) {
                votes[preds[i]] += 1;
                label = samples.labels[i];
            }
            let winner = (0..n_classes).fold(0, |b, c| if votes[c] > votes[b] { c } else { b });
            (t, label, winner)
        })
        .collect()
}

/// Trial-level confusion after voting over each trial's windows.
pub fn evaluate_trials(model: &mut Model, samples: &Samples) -> Result<(Confusion, Metrics)> {
    if samples.is_empty() {
        return Err(HarnessError::EmptyTestSet);
    }
    let k = model.config().n_classes;
    let preds = predict_samples(model, samples)?;
    let c = Confusion::from_pairs(k, vote(samples, &preds, k).into_iter().map(|(_, t, p)| (t, p)));
    let m = Metrics::from_confusion(&c);
    Ok((c, m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    /// Source trials of the training samples.
    pub train_trials: Vec<usize>,
    pub test_trials: Vec<usize>,
    pub confusion: Confusion,
    pub metrics: Metrics,
    /// Last epoch's training loss (network runs only).
    pub final_train_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub mean: Metrics,
    pub std: Metrics,
}

impl CvReport {
    fn from_folds(folds: Vec<FoldResult>) -> Self {
        let all: Vec<Metrics> = folds.iter().map(|f| f.metrics).collect();
        let (mean, std) = Metrics::mean_std(&all);
        Self { folds, mean, std }
    }
}

/// `(train, test)` trial indices of every fold (a single pair in holdout mode).
pub fn splits(dataset: &EEGDataset, cfg: &RunConfig) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    Ok(match cfg.run.mode {
        SplitMode::Cv => {
            let plan = stratified_folds(dataset, cfg.run.folds, cfg.hyper.seed)?;
            (0..plan.k).map(|f| plan.split(f)).collect()
        }
        SplitMode::Holdout => vec![holdout_indices(dataset, cfg.run.train_fraction, cfg.hyper.seed)?],
    })
}

fn check_disjoint(train: &Samples, test: &Samples) -> Result<()> {
    let train_ids = train.trials();
    if let Some(t) = test.trials().iter().find(|t| train_ids.contains(t)) {
        return Err(HarnessError::Config(format!(
            "trial {t} is in both train and test windows"
        )));
    }
    Ok(())
}

fn network_fold(
    filtered: &EEGDataset,
    train_idx: &[usize],
    test_idx: &[usize],
    cfg: &RunConfig,
    model_cfg: &ModelConfig,
    fold: usize,
) -> Result<FoldResult> {
    let augment = cfg.run.augment;
    let train_s = Samples::build(filtered, train_idx, &cfg.preprocess, augment)?;
    let test_s = Samples::build(filtered, test_idx, &cfg.preprocess, augment)?;
    check_disjoint(&train_s, &test_s)?;
    let mut model = Model::new(ModelConfig {
        seed: model_cfg.seed ^ fold as u64,
        ..model_cfg.clone()
    })?;
    let hp = Hyperparams {
        seed: cfg.hyper.seed ^ fold as u64,
        ..cfg.hyper.clone()
    };
    let history = train(&mut model, &train_s, &hp)?;
    let (confusion, metrics) = evaluate_trials(&mut model, &test_s)?;
    Ok(FoldResult {
        fold,
        train_trials: train_s.trials(),
        test_trials: test_s.trials(),
        confusion,
        metrics,
        final_train_loss: history.loss.last().copied(),
    })
}

fn csp_fold(
    filtered: &EEGDataset,
    train_idx: &[usize],
    test_idx: &[usize],
    cfg: &RunConfig,
    fold: usize,
) -> Result<FoldResult> {
    let segment = |idx: &[usize]| -> Result<(Vec<Trial>, Vec<usize>, Vec<usize>)> {
        let (mut trials, mut labels, mut ids) = (Vec::new(), Vec::new(), Vec::new());
        for &i in idx {
            for w in windows(&filtered.trials[i], &cfg.preprocess, cfg.run.augment)? {
                trials.push(w);
                labels.push(filtered.labels[i]);
                ids.push(i);
            }
        }
        Ok((trials, labels, ids))
    };
    let (tr, tr_labels, tr_ids) = segment(train_idx)?;
    let (te, te_labels, te_ids) = segment(test_idx)?;
    if te.is_empty() {
        return Err(HarnessError::EmptyTestSet);
    }
    let k = filtered.n_classes;
    let clf = CspLda::fit(&tr, &tr_labels, k, cfg.run.csp_filters_per_end)?;
    let preds = te
        .iter()
        .map(|t| clf.predict(t))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    // reuse the voting logic through a data-less sample list
    let tagged = Samples {
        dims: [0, 0, 0],
        data: Vec::new(),
        labels: te_labels,
        trial_ids: te_ids,
    };
    let confusion = Confusion::from_pairs(k, vote(&tagged, &preds, k).into_iter().map(|(_, t, p)| (t, p)));
    let mut train_trials = tr_ids;
    train_trials.dedup();
    Ok(FoldResult {
        fold,
        train_trials,
        test_trials: tagged.trials(),
        metrics: Metrics::from_confusion(&confusion),
        confusion,
        final_train_loss: None,
    })
}

fn run_with_model(dataset: &EEGDataset, cfg: &RunConfig, model_cfg: &ModelConfig) -> Result<CvReport> {
    cfg.validate(dataset)?;
    let filtered = filter_trials(dataset, &cfg.preprocess)?;
    let mut folds = Vec::new();
    for (fold, (train_idx, test_idx)) in splits(dataset, cfg)?.into_iter().enumerate() {
        folds.push(match cfg.run.classifier {
            Classifier::Clmi => network_fold(&filtered, &train_idx, &test_idx, cfg, model_cfg, fold)?,
            Classifier::CspLda => csp_fold(&filtered, &train_idx, &test_idx, cfg, fold)?,
        });
    }
    Ok(CvReport::from_folds(folds))
}

/// Cross-validation (or a single holdout split) with the configured
/// classifier.
pub fn run_cv(dataset: &EEGDataset, cfg: &RunConfig) -> Result<CvReport> {
    run_with_model(dataset, cfg, &cfg.model)
}

/// The three ablation variants of `cfg.model`, on identical splits and seeds.
pub fn run_ablation(dataset: &EEGDataset, cfg: &RunConfig) -> Result<Vec<(String, CvReport)>> {
    let cfg = RunConfig {
        run: config::RunSection {
            classifier: Classifier::Clmi,
            ..cfg.run.clone()
        },
        ..cfg.clone()
    };
    build_ablation_suite(&cfg.model)
        .into_iter()
        .map(|(name, m)| Ok((name, run_with_model(dataset, &cfg, &m)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lr,
    LstmUnits,
    Epochs,
}

impl SweepAxis {
    pub fn grid(self) -> Vec<f64> {
        match self {
            SweepAxis::Lr => vec![0.1, 0.01, 0.001, 0.0001, 0.00001],
            SweepAxis::LstmUnits => vec![64.0, 128.0, 256.0, 512.0, 1024.0],
            SweepAxis::Epochs => vec![30.0, 50.0, 100.0, 150.0, 200.0],
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lr" => Some(SweepAxis::Lr),
            "lstm_units" => Some(SweepAxis::LstmUnits),
            "epochs" => Some(SweepAxis::Epochs),
            _ => None,
        }
    }
}

/// One config per value, identical apart from the swept field.
pub fn sweep_plan(cfg: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<(f64, RunConfig)>> {
    values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            let whole = |v: f64| {
                if v >= 1.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(HarnessError::Config(format!(
                        "{axis:?} value {v} must be a positive integer"
                    )))
                }
            };
            match axis {
                SweepAxis::Lr => {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(HarnessError::Config(format!("learning rate {v} must be positive")));
                    }
                    c.hyper.lr0 = v;
                }
                SweepAxis::LstmUnits => c.model.lstm_units = whole(v)?,
                SweepAxis::Epochs => c.hyper.epochs = whole(v)?,
            }
            Ok((v, c))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub report: CvReport,
}

pub fn run_sweep(dataset: &EEGDataset, cfg: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    sweep_plan(cfg, axis, values)?
        .into_iter()
        .map(|(value, c)| {
            Ok(SweepRow {
                value,
                report: run_cv(dataset, &c)?,
            })
        })
        .collect()
}

/// Writes `label,f0,…` then one row of penultimate features per sample.
pub fn export_features(model: &mut Model, samples: &Samples, path: impl AsRef<Path>) -> Result<()> {
    let width = model.config().concat_width();
    let mut out = String::from("label");
    for i in 0..width {
        write!(out, ",f{i}").expect("string write");
    }
    out.push('\n');
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let all: Vec<usize> = (0..samples.len()).collect();
    for idx in all.chunks(EVAL_BATCH) {
        let pass = model.forward(&samples.batch(idx), clmi_autodiff::Mode::Infer, &mut rng)?;
        for (row, &i) in pass.features.data().chunks(width).zip(idx) {
            write!(out, "{}", samples.labels[i]).expect("string write");
            for v in row {
                write!(out, ",{v}").expect("string write");
            }
            out.push('\n');
        }
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(out.as_bytes())?;
    f.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDoc {
    pub fold: usize,
    /// Row-major, rows = true class.
    pub confusion: Vec<Vec<u64>>,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub n_test_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub name: String,
    pub folds: Vec<FoldDoc>,
    pub mean: Metrics,
    pub std: Metrics,
}

impl ReportDoc {
    pub fn new(name: impl Into<String>, r: &CvReport) -> Self {
        Self {
            name: name.into(),
            folds: r
                .folds
                .iter()
                .map(|f| FoldDoc {
                    fold: f.fold,
                    confusion: f.confusion.counts.clone(),
                    metrics: f.metrics,
                    n_test_trials: f.test_trials.len(),
                })
                .collect(),
            mean: r.mean,
            std: r.std,
        }
    }
}

/// The metrics JSON document. `wall_clock_seconds` is the only field that
/// varies between identical runs; it is serialized last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDoc {
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub reports: Vec<ReportDoc>,
    pub wall_clock_seconds: f64,
}

impl MetricsDoc {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }
}
