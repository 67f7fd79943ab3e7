//! Confusion matrices and the scores derived from them.

use serde::{Deserialize, Serialize};

/// `K×K` counts, rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: Vec<Vec<u64>>,
}

impl Confusion {
    pub fn new(k: usize) -> Self {
        Self {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_pairs(k: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut c = Self::new(k);
        for (t, p) in pairs {
            c.add(t, p);
        }
        c
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, truth: usize, pred: usize) {
        self.counts[truth][pred] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.trace(), self.total())
    }

    /// Per-class `(tp, fp, fn)`.
    pub fn class_counts(&self, c: usize) -> (u64, u64, u64) {
        let tp = self.counts[c][c];
        let fp = (0..self.k()).map(|r| self.counts[r][c]).sum::<u64>() - tp;
        let fn_ = self.counts[c].iter().sum::<u64>() - tp;
        (tp, fp, fn_)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// F1 from class-summed TP, FP and FN.
pub fn micro_f1(c: &Confusion) -> f64 {
    let (p, r) = micro_precision_recall(c);
    f1(p, r)
}

pub fn micro_precision_recall(c: &Confusion) -> (f64, f64) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for k in 0..c.k() {
        let (a, b, d) = c.class_counts(k);
        tp += a;
        fp += b;
        fn_ += d;
    }
    (ratio(tp, tp + fp), ratio(tp, tp + fn_))
}

/// Unweighted mean of per-class F1 scores.
pub fn macro_f1(c: &Confusion) -> f64 {
    if c.k() == 0 {
        return 0.0;
    }
    let sum: f64 = (0..c.k())
        .map(|k| {
            let (tp, fp, fn_) = c.class_counts(k);
            f1(ratio(tp, tp + fp), ratio(tp, tp + fn_))
        })
        .sum();
    sum / c.k() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision_micro: f64,
    pub recall_micro: f64,
    pub f1_micro: f64,
    pub f1_macro: f64,
}

impl Metrics {
    pub fn from_confusion(c: &Confusion) -> Self {
        let (p, r) = micro_precision_recall(c);
        Self {
            accuracy: c.accuracy(),
            precision_micro: p,
            recall_micro: r,
            f1_micro: f1(p, r),
            f1_macro: macro_f1(c),
        }
    }

    fn fields(&self) -> [f64; 5] {
        [
            self.accuracy,
            self.precision_micro,
            self.recall_micro,
            self.f1_micro,
            self.f1_macro,
        ]
    }

    fn from_fields(f: [f64; 5]) -> Self {
        Self {
            accuracy: f[0],
            precision_micro: f[1],
            recall_micro: f[2],
            f1_micro: f[3],
            f1_macro: f[4],
        }
    }

    /// Field-wise arithmetic mean and population standard deviation.
    pub fn mean_std(all: &[Metrics]) -> (Metrics, Metrics) {
        if all.is_empty() {
            return (Metrics::default(), Metrics::default());
        }
        let n = all.len() as f64;
        let mut mean = [0.0; 5];
        for m in all {
            for (a, v) in mean.iter_mut().zip(m.fields()) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|a| *a /= n);
        let mut var = [0.0; 5];
        for m in all {
            for ((a, v), mu) in var.iter_mut().zip(m.fields()).zip(mean) {
                *a += (v - mu).powi(2);
            }
        }
        let std = var.map(|v| (v / n).sqrt());
        (Metrics::from_fields(mean), Metrics::from_fields(std))
    }
}
