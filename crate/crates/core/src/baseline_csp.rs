//! Common spatial patterns (one-vs-rest) with a ridge-regularized LDA
//! classifier: the classical baseline run on the same folds as the network.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::data_io::Trial;

#[derive(Debug, Error, PartialEq)]
pub enum CspError {
    #[error("class {class} has {count} trials, need at least 2")]
    TooFewTrials { class: usize, count: usize },
    #[error("composite covariance is singular")]
    SingularCovariance,
    #[error("trial has no variance along a spatial filter")]
    DegenerateTrial,
    #[error("within-class scatter is singular")]
    SingularScatter,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, CspError>;

/// Added to each side of the CSP problem as `CSP_RIDGE · trace(Σa + Σb)/n · I`.
///
/// Regularizing both sides equally puts any shared null direction (CAR
/// removes one) at eigenvalue exactly 1/2, the uninformative middle of the
/// spectrum, instead of letting round-off decide where it lands.
pub const CSP_RIDGE: f64 = 1e-9;
/// Added to the pooled LDA scatter as `LDA_RIDGE · trace/d · I`.
pub const LDA_RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct CspFilters {
    /// `(n_filters, n_channels)`; per class, `m` rows from the top of the
    /// eigenvalue spectrum then `m` from the bottom.
    pub w: DMatrix<f64>,
    /// Eigenvalue of each row, in `[0, 1]`.
    pub eigenvalues: Vec<f64>,
    pub m: usize,
}

fn trial_matrix(t: &Trial) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.n_channels(), t.n_samples(), t.data())
}

/// Channel covariance of a mean-removed trial, divided by its trace.
pub fn normalized_covariance(t: &Trial) -> DMatrix<f64> {
    let mut x = trial_matrix(t);
    for mut row in x.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    let c = &x * x.transpose();
    let tr = c.trace();
    if tr > 0.0 {
        c / tr
    } else {
        c
    }
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (vals, vecs)
}

/// Filters `W` (rows) with `W (Σa + Σb) Wᵀ = I` and `W Σa Wᵀ` diagonal,
/// ordered by decreasing eigenvalue. Also returns the eigenvalues.
pub fn csp_pair(sa: &DMatrix<f64>, sb: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = sa.nrows();
    let ridge = DMatrix::identity(n, n) * (CSP_RIDGE * (sa + sb).trace() / n as f64);
    let sa = sa + &ridge;
    let comp = &sa + sb + ridge;
    let (vals, vecs) = sorted_eigen(comp);
    if vals.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(CspError::SingularCovariance);
    }
    let inv_sqrt = DMatrix::from_diagonal(&DVector::from_iterator(n, vals.iter().map(|v| 1.0 / v.sqrt())));
    let p = inv_sqrt * vecs.transpose();
    let s = &p * &sa * p.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let (lam, v) = sorted_eigen(s);
    Ok((v.transpose() * p, lam))
}

/// One-vs-rest CSP over `n_classes`, `m` filters from each spectral end.
pub fn csp_fit(trials: &[Trial], labels: &[usize], n_classes: usize, m: usize) -> Result<CspFilters> {
    if trials.len() != labels.len() || trials.is_empty() {
        return Err(CspError::ShapeMismatch(format!(
            "{} trials, {} labels",
            trials.len(),
            labels.len()
        )));
    }
    let n = trials[0].n_channels();
    if m == 0 || 2 * m > n {
        return Err(CspError::ShapeMismatch(format!("{m} filters per end for {n} channels")));
    }
    let mut sums = vec![DMatrix::zeros(n, n); n_classes];
    let mut counts = vec![0usize; n_classes];
    for (t, &l) in trials.iter().zip(labels) {
        if t.n_channels() != n || l >= n_classes {
            return Err(CspError::ShapeMismatch(format!(
                "trial with {} channels, label {l}",
                t.n_channels()
            )));
        }
        sums[l] += normalized_covariance(t);
        counts[l] += 1;
    }
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
        return Err(CspError::TooFewTrials { class, count });
    }
    let means: Vec<DMatrix<f64>> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();

    let mut rows = Vec::new();
    let mut eigenvalues = Vec::new();
    for c in 0..n_classes {
        let rest = means
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != c)
            .fold(DMatrix::zeros(n, n), |acc, (_, s)| acc + s)
            / (n_classes - 1) as f64;
        let (w, lam) = csp_pair(&means[c], &rest)?;
        for i in (0..m).chain(n - m..n) {
            rows.push(w.row(i).into_owned());
            eigenvalues.push(lam[i]);
        }
    }
    Ok(CspFilters {
        w: DMatrix::from_rows(&rows),
        eigenvalues,
        m,
    })
}

/// `log(var_i / Σ_j var_j)` of each spatially filtered signal.
pub fn csp_features(trial: &Trial, filters: &CspFilters) -> Result<Vec<f64>> {
    if trial.n_channels() != filters.w.ncols() {
        return Err(CspError::ShapeMismatch(format!(
            "trial has {} channels, filters expect {}",
            trial.n_channels(),
            filters.w.ncols()
        )));
    }
    let z = &filters.w * trial_matrix(trial);
    let vars: Vec<f64> = z.row_iter().map(|r| r.variance()).collect();
    let total: f64 = vars.iter().sum();
    if !(total > 0.0) || vars.iter().any(|&v| !(v > 0.0)) {
        return Err(CspError::DegenerateTrial);
    }
    Ok(vars.iter().map(|v| (v / total).ln()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    /// Discriminant `δ_c(x) = weights[c]·x + biases[c]`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

pub fn lda_fit(features: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<LdaModel> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(CspError::ShapeMismatch(format!(
            "{} rows, {} labels",
            features.len(),
            labels.len()
        )));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|f| f.len() != d) {
        return Err(CspError::ShapeMismatch("ragged or empty feature rows".into()));
    }
    let mut counts = vec![0usize; n_classes];
    let mut means = vec![DVector::<f64>::zeros(d); n_classes];
    for (f, &l) in features.iter().zip(labels) {
        if l >= n_classes {
            return Err(CspError::ShapeMismatch(format!("label {l} >= {n_classes}")));
        }
        means[l] += DVector::from_column_slice(f);
        counts[l] += 1;
    }
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
        return Err(CspError::TooFewTrials { class, count });
    }
    for (mu, &c) in means.iter_mut().zip(&counts) {
        *mu /= c as f64;
    }
    let mut scatter = DMatrix::<f64>::zeros(d, d);
    for (f, &l) in features.iter().zip(labels) {
        let dx = DVector::from_column_slice(f) - &means[l];
        scatter += &dx * dx.transpose();
    }
    scatter /= (features.len() - n_classes).max(1) as f64;
    let ridge = LDA_RIDGE * scatter.trace() / d as f64;
    for i in 0..d {
        scatter[(i, i)] += ridge;
    }
    let chol = scatter.cholesky().ok_or(CspError::SingularScatter)?;
    let n = features.len() as f64;
    let mut weights = Vec::with_capacity(n_classes);
    let mut biases = Vec::with_capacity(n_classes);
    for (mu, &c) in means.iter().zip(&counts) {
        let w = chol.solve(mu);
        biases.push(-0.5 * mu.dot(&w) + (c as f64 / n).ln());
        weights.push(w.iter().copied().collect());
    }
    Ok(LdaModel { weights, biases })
}

/// Class with the largest discriminant; ties go to the lowest class id.
pub fn lda_predict(model: &LdaModel, x: &[f64]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (c, (w, b)) in model.weights.iter().zip(&model.biases).enumerate() {
        let s = w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b;
        if s > best.1 {
            best = (c, s);
        }
    }
    best.0
}

/// CSP filters plus the LDA trained on their features.
#[derive(Debug, Clone)]
pub struct CspLda {
    pub filters: CspFilters,
    pub lda: LdaModel,
}

impl CspLda {
    pub fn fit(trials: &[Trial], labels: &[usize], n_classes: usize, m: usize) -> Result<Self> {
        let filters = csp_fit(trials, labels, n_classes, m)?;
        let feats = trials
            .iter()
            .map(|t| csp_features(t, &filters))
            .collect::<Result<Vec<_>>>()?;
        let lda = lda_fit(&feats, labels, n_classes)?;
        Ok(Self { filters, lda })
    }

    pub fn predict(&self, trial: &Trial) -> Result<usize> {
        Ok(lda_predict(&self.lda, &csp_features(trial, &self.filters)?))
    }
}
