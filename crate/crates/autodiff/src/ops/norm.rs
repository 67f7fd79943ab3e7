//! Batch normalization over the last (feature) axis.

/// Per-feature statistics cached by the forward pass.
#[derive(Debug, Clone)]
pub struct NormCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    /// Whether the statistics came from the batch (train) or running values.
    pub batch_stats: bool,
}

/// Biased per-feature mean and variance over all leading axes.
pub fn moments(x: &[f64], features: usize) -> (Vec<f64>, Vec<f64>) {
    let n = (x.len() / features) as f64;
    let mut mean = vec![0.0; features];
    for row in x.chunks_exact(features) {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; features];
    for row in x.chunks_exact(features) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

pub fn normalize(
    x: &[f64],
    mean: &[f64],
    var: &[f64],
    eps: f64,
    gamma: &[f64],
    beta: &[f64],
    batch_stats: bool,
) -> (Vec<f64>, NormCache) {
    let features = mean.len();
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut xhat = vec![0.0; x.len()];
    let mut y = vec![0.0; x.len()];
    for ((xr, hr), yr) in x
        .chunks_exact(features)
        .zip(xhat.chunks_exact_mut(features))
        .zip(y.chunks_exact_mut(features))
    {
        for j in 0..features {
            let h = (xr[j] - mean[j]) * inv_std[j];
            hr[j] = h;
            yr[j] = gamma[j] * h + beta[j];
        }
    }
    (
        y,
        NormCache {
            xhat,
            inv_std,
            batch_stats,
        },
    )
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn backward(cache: &NormCache, gamma: &[f64], dy: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let features = gamma.len();
    let n = (dy.len() / features) as f64;
    let mut dgamma = vec![0.0; features];
    let mut dbeta = vec![0.0; features];
    for (dr, hr) in dy.chunks_exact(features).zip(cache.xhat.chunks_exact(features)) {
        for j in 0..features {
            dgamma[j] += dr[j] * hr[j];
            dbeta[j] += dr[j];
        }
    }
    let mut dx = vec![0.0; dy.len()];
    for ((dxr, dr), hr) in dx
        .chunks_exact_mut(features)
        .zip(dy.chunks_exact(features))
        .zip(cache.xhat.chunks_exact(features))
    {
        for j in 0..features {
            let scale = gamma[j] * cache.inv_std[j];
            dxr[j] = if cache.batch_stats {
                // d/dx of (x - mean(x)) / std(x), summed over the batch
                scale * (dr[j] - dbeta[j] / n - hr[j] * dgamma[j] / n)
            } else {
                scale * dr[j]
            };
        }
    }
    (dx, dgamma, dbeta)
}
