//! Non-overlapping max pooling with ceiling ("same") output size.
//!
//! Window positions past the input edge behave as −∞ and never win. Ties go to
//! the lowest flat input index, which is also where the gradient is routed.

use crate::error::{shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolGeom {
    pub batch: usize,
    pub dims: [usize; 3],
    pub pool: [usize; 3],
    pub channels: usize,
}

impl PoolGeom {
    pub fn infer(input: &[usize], pool: [usize; 3]) -> Result<Self> {
        if input.len() != 5 || pool.contains(&0) {
            return Err(shape_err("maxpool3d", format!("input {input:?}, pool {pool:?}")));
        }
        if input[1..4].contains(&0) {
            return Err(shape_err("maxpool3d", format!("empty spatial dims {input:?}")));
        }
        Ok(Self {
            batch: input[0],
            dims: [input[1], input[2], input[3]],
            pool,
            channels: input[4],
        })
    }

    pub fn out_dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.dims[a].div_ceil(self.pool[a]))
    }

    pub fn output_shape(&self) -> Vec<usize> {
        let o = self.out_dims();
        vec![self.batch, o[0], o[1], o[2], self.channels]
    }
}

/// Returns the pooled values and, per output element, the flat input index
/// that produced it.
pub fn forward(g: &PoolGeom, x: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let [d1, d2, d3] = g.dims;
    let [q1, q2, q3] = g.pool;
    let [o1n, o2n, o3n] = g.out_dims();
    let c = g.channels;
    let n_out = g.batch * o1n * o2n * o3n * c;
    let mut out = vec![f64::NEG_INFINITY; n_out];
    let mut arg = vec![usize::MAX; n_out];
    for b in 0..g.batch {
        for o1 in 0..o1n {
            for o2 in 0..o2n {
                for o3 in 0..o3n {
                    let obase = (((b * o1n + o1) * o2n + o2) * o3n + o3) * c;
                    for i1 in o1 * q1..((o1 + 1) * q1).min(d1) {
                        for i2 in o2 * q2..((o2 + 1) * q2).min(d2) {
                            for i3 in o3 * q3..((o3 + 1) * q3).min(d3) {
                                let ibase = (((b * d1 + i1) * d2 + i2) * d3 + i3) * c;
                                for ch in 0..c {
                                    let v = x[ibase + ch];
                                    // strict comparison keeps the earliest index on ties
                                    if v > out[obase + ch] || arg[obase + ch] == usize::MAX {
                                        out[obase + ch] = v;
                                        arg[obase + ch] = ibase + ch;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (out, arg)
}

pub fn backward(input_len: usize, argmax: &[usize], dy: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; input_len];
    for (&i, &g) in argmax.iter().zip(dy) {
        dx[i] += g;
    }
    dx
}
