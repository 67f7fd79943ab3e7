//! Central finite-difference gradient checking.

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Worst relative error over all checked entries, with the entry it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckReport {
    pub max_rel_err: f64,
    pub input: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Compares analytic gradients of a scalar function with central differences.
///
/// `f` receives a fresh graph and one leaf per tensor in `inputs` and must
/// return a scalar. Every entry of every input is perturbed by `±step`.
pub fn check<F>(inputs: &[Tensor], step: f64, floor: f64, f: F) -> Result<CheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |ins: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ins.iter().map(|t| g.leaf(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.value(out).item())
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    let grads = g.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| grads.wrt(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]))
        .collect();

    let mut report = CheckReport {
        max_rel_err: 0.0,
        input: 0,
        index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut work = inputs.to_vec();
    for (k, input) in inputs.iter().enumerate() {
        for i in 0..input.len() {
            let orig = input.data()[i];
            work[k].data_mut()[i] = orig + step;
            let up = eval(&work)?;
            work[k].data_mut()[i] = orig - step;
            let down = eval(&work)?;
            work[k].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic[k][i];
            let e = rel_err(a, numeric, floor);
            if e > report.max_rel_err {
                report = CheckReport {
                    max_rel_err: e,
                    input: k,
                    index: i,
                    analytic: a,
                    numeric,
                };
            }
        }
    }
    Ok(report)
}

/// Per-layer finite-difference checks over small random shapes.
pub mod suite {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::{check, CheckReport};
    use crate::error::Result;
    use crate::graph::{BatchNormState, Graph, Mode, Var};
    use crate::tensor::Tensor;

    /// Perturbation used for the central differences.
    pub const STEP: f64 = 1e-4;
    /// Denominator floor of the relative error.
    pub const FLOOR: f64 = 1e-6;

    pub const LAYERS: &[&str] = &[
        "conv3d",
        "multiscale_conv3d",
        "batch_norm_train",
        "maxpool3d",
        "relu",
        "softmax",
        "softmax_cross_entropy",
        "lstm",
        "attention_pool",
        "dense",
        "concat",
        "dropout_fixed_mask",
    ];

    fn uniform(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    /// Values bounded away from zero so no ±step perturbation crosses a ReLU kink.
    fn away_from_zero(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(shape, |_| {
            let m = rng.random_range(0.05..1.0);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
    }

    /// Distinct values spaced well beyond the step, so pooling argmaxes are stable.
    fn distinct(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n: usize = shape.iter().product();
        let mut vals: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            vals.swap(i, j);
        }
        Tensor::new(shape, vals).expect("shape product")
    }

    fn probe(g: &mut Graph, out: Var, seed: u64) -> Result<Var> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let n = g.value(out).len();
        let w = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        g.weighted_sum(out, w)
    }

    /// Runs one layer's check for one seed.
    pub fn check_layer(layer: &str, seed: u64) -> Result<CheckReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match layer {
            "conv3d" => {
                let ins = [
                    uniform(&[2, 4, 4, 4, 2], &mut rng),
                    uniform(&[3, 3, 3, 2, 3], &mut rng),
                    uniform(&[3], &mut rng),
                ];
                check(&ins, STEP, FLOOR, |g, v| {
                    let y = g.conv3d(v[0], v[1], v[2])?;
                    probe(g, y, seed)
                })
            }
            "multiscale_conv3d" => {
                let ins = [
                    uniform(&[1, 3, 3, 3, 2], &mut rng),
                    uniform(&[3, 3, 3, 2, 2], &mut rng),
                    uniform(&[2], &mut rng),
                    uniform(&[5, 5, 5, 2, 2], &mut rng),
                    uniform(&[2], &mut rng),
                    uniform(&[7, 7, 7, 2, 2], &mut rng),
                    uniform(&[2], &mut rng),
                ];
                check(&ins, STEP, FLOOR, |g, v| {
                    let y = g.multiscale_conv3d(v[0], &[(v[1], v[2]), (v[3], v[4]), (v[5], v[6])])?;
                    probe(g, y, seed)
                })
            }
            "batch_norm_train" => {
                let ins = [
                    uniform(&[2, 3, 3, 2, 3], &mut rng),
                    uniform(&[3], &mut rng),
                    uniform(&[3], &mut rng),
                ];
                check(&ins, STEP, FLOOR, |g, v| {
                    let mut st = BatchNormState::new(3, 0.9, 1e-5);
                    let y = g.batch_norm(v[0], v[1], v[2], &mut st, Mode::Train)?;
                    probe(g, y, seed)
                })
            }
            "maxpool3d" => {
                let ins = [distinct(&[2, 3, 4, 3, 2], &mut rng)];
                check(&ins, STEP, FLOOR, |g, v| {
                    let y = g.maxpool3d(v[0], [2, 2, 2])?;
                    probe(g, y, seed)
                })
            }
            "relu" => {
                let ins = [away_from_zero(&[3, 7], &mut rng)];
                check(&ins, STEP, FLOOR, |g, v| {
                    let y = g.relu(v[0])?;
                    probe(g, y, seed)
                })
            }
            "softmax" => {
                let ins = [uniform(&[3, 5], &mut rng)];
                check(&ins, STEP, FLOOR, |g, v| {
                    let y = g.softmax(v[0])?;
                    probe(g, y, seed)
                })
            }
            "softmax_cross_entropy" => {
                let ins = [uniform(&[4, 4], &mut rng)];
                let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..4)).collect();
                check(&ins, STEP, FLOOR, |g, v| g.cross_entropy(v[0], &labels))
            }
            "lstm" => {
                let ins = [
                    uniform(&[2, 4, 3], &mut rng),
                    uniform(&[3, 12], &mut rng),
                    uniform(&[3, 12], &mut rng),
                    uniform(&[12], &mut rng),
                ];
                check(&ins, STEP, FLOOR, |g, v| {
                    let y = g.lstm(v[0], v[1], v[2], v[3])?;
                    probe(g, y, seed)
                })
            }
            "attention_pool" => {
                let ins = [
                    uniform(&[2, 5, 3], &mut rng),
                    uniform(&[3, 3], &mut rng),
                    uniform(&[3], &mut rng),
                    uniform(&[3], &mut rng),
                ];
                check(&ins, STEP, FLOOR, |g, v| {
                    let y = g.attention_pool(v[0], v[1], v[2], v[3])?;
                    probe(g, y, seed)
                })
            }
            "dense" => {
                let ins = [
                    uniform(&[3, 5], &mut rng),
                    uniform(&[5, 4], &mut rng),
                    uniform(&[4], &mut rng),
                ];
                check(&ins, STEP, FLOOR, |g, v| {
                    let y = g.dense(v[0], v[1], v[2])?;
                    probe(g, y, seed)
                })
            }
            "concat" => {
                let ins = [
                    uniform(&[2, 3], &mut rng),
                    uniform(&[2, 2], &mut rng),
                    uniform(&[2, 4], &mut rng),
                ];
                check(&ins, STEP, FLOOR, |g, v| {
                    let y = g.concat(&[v[0], v[1], v[2]])?;
                    probe(g, y, seed)
                })
            }
            "dropout_fixed_mask" => {
                let ins = [uniform(&[3, 6], &mut rng)];
                let p = 0.3;
                let mask: Vec<f64> = (0..18)
                    .map(|_| if rng.random::<f64>() < p { 0.0 } else { 1.0 / (1.0 - p) })
                    .collect();
                check(&ins, STEP, FLOOR, |g, v| {
                    let y = g.dropout_with_mask(v[0], mask.clone())?;
                    probe(g, y, seed)
                })
            }
            other => Err(crate::error::AutodiffError::BadSpec(format!(
                "no gradient check for layer `{other}`"
            ))),
        }
    }

    /// Worst report per layer over `seeds` seeds.
    pub fn run(seeds: u64) -> Result<Vec<(&'static str, CheckReport)>> {
        LAYERS
            .iter()
            .map(|&layer| {
                let mut worst: Option<CheckReport> = None;
                for seed in 0..seeds {
                    let r = check_layer(layer, seed)?;
                    if worst.is_none_or(|w| r.max_rel_err > w.max_rel_err) {
                        worst = Some(r);
                    }
                }
                Ok((layer, worst.expect("at least one seed")))
            })
            .collect()
    }
}
