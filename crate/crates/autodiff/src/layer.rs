//! Hyperparameter descriptions of the supported layer kinds.

use crate::error::{AutodiffError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    /// "Same"-padded convolution; a 2D layer is a kernel with `kernel[2] == 1`.
    Conv3d {
        kernel: [usize; 3],
        filters: usize,
    },
    BatchNorm {
        momentum: f64,
        eps: f64,
    },
    MaxPool3d {
        pool: [usize; 3],
    },
    Relu,
    Dense {
        units: usize,
    },
    Dropout {
        p: f64,
    },
    Lstm {
        units: usize,
    },
    AttentionPool {
        attn_units: usize,
    },
    Flatten,
    Concat,
    Softmax,
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AutodiffError::BadSpec(m));
        match *self {
            LayerSpec::Conv3d { kernel, filters } => {
                if kernel.iter().any(|&k| k == 0 || k % 2 == 0) {
                    return bad(format!("conv kernel {kernel:?} must be odd and positive"));
                }
                if filters == 0 {
                    return bad("conv needs at least one filter".into());
                }
            }
            LayerSpec::BatchNorm { momentum, eps } => {
                if !(0.0..1.0).contains(&momentum) || eps <= 0.0 {
                    return bad(format!("batch norm momentum {momentum}, eps {eps}"));
                }
            }
            LayerSpec::MaxPool3d { pool } => {
                if pool.iter().any(|&p| !(1..=2).contains(&p)) || pool[..2] != [2, 2] {
                    return bad(format!("pool {pool:?} must be (2,2,2) or (2,2,1)"));
                }
            }
            LayerSpec::Dropout { p } => {
                if !(0.0..1.0).contains(&p) {
                    return bad(format!("dropout p = {p} outside [0, 1)"));
                }
            }
            LayerSpec::Dense { units: 0 }
            | LayerSpec::Lstm { units: 0 }
            | LayerSpec::AttentionPool { attn_units: 0 } => {
                return bad(format!("{self:?} needs a positive width"));
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_even_kernels_and_bad_dropout() {
        assert!(LayerSpec::Conv3d {
            kernel: [3, 4, 3],
            filters: 2
        }
        .validate()
        .is_err());
        assert!(LayerSpec::Conv3d {
            kernel: [7, 7, 1],
            filters: 2
        }
        .validate()
        .is_ok());
        assert!(LayerSpec::Dropout { p: 1.0 }.validate().is_err());
        assert!(LayerSpec::Dropout { p: 0.0 }.validate().is_ok());
        assert!(LayerSpec::MaxPool3d { pool: [3, 3, 3] }.validate().is_err());
        assert!(LayerSpec::Lstm { units: 0 }.validate().is_err());
    }
}
