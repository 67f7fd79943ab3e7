//! Bias-corrected Adam.

use crate::error::{AutodiffError, Result};
use crate::param::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update of every parameter in `params`, then clears gradients.
///
/// Fails without touching anything if some parameter has no gradient.
pub fn adam_step(params: &mut ParamStore, lr: f64, cfg: AdamConfig) -> Result<()> {
    if let Some(p) = params.iter().find(|p| p.grad.is_none()) {
        return Err(AutodiffError::MissingGrad(p.name.clone()));
    }
    for p in params.iter_mut() {
        let grad = p.grad.take().expect("checked above");
        if p.adam_m.len() != grad.len() {
            p.adam_m = vec![0.0; grad.len()];
            p.adam_v = vec![0.0; grad.len()];
        }
        p.step_count += 1;
        let t = p.step_count as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (((w, &g), m), v) in p
            .tensor
            .data_mut()
            .iter_mut()
            .zip(&grad)
            .zip(p.adam_m.iter_mut())
            .zip(p.adam_v.iter_mut())
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar_store(value: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", Tensor::new(&[1], vec![value]).unwrap()).unwrap();
        s
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let mut s = scalar_store(0.5);
        s.get_mut(s.id("w").unwrap()).grad = Some(vec![0.0]);
        adam_step(&mut s, 0.001, AdamConfig::default()).unwrap();
        assert_eq!(s.by_name("w").unwrap().tensor.data(), &[0.5]);
    }

    #[test]
    fn first_step_closed_form() {
        let mut s = scalar_store(0.0);
        let id = s.id("w").unwrap();
        s.get_mut(id).grad = Some(vec![1.0]);
        adam_step(&mut s, 0.001, AdamConfig::default()).unwrap();
        let (b1, b2, eps, g, lr) = (0.9f64, 0.999f64, 1e-8, 1.0f64, 0.001);
        let m_hat = (1.0 - b1) * g / (1.0 - b1);
        let v_hat = (1.0 - b2) * g * g / (1.0 - b2);
        let expected = -lr * m_hat / (v_hat.sqrt() + eps);
        let got = s.get(id).tensor.data()[0];
        assert!((got - expected).abs() < 1e-15);
        assert!((got + 0.001).abs() < 1e-10);
        assert_eq!(s.get(id).step_count, 1);
        assert!(s.get(id).grad.is_none());
    }

    #[test]
    fn two_step_trace() {
        let mut s = scalar_store(0.3);
        let id = s.id("w").unwrap();
        let (b1, b2, eps, lr, g) = (0.9f64, 0.999f64, 1e-8f64, 0.01f64, 0.25f64);
        let (mut w, mut m, mut v) = (0.3f64, 0.0f64, 0.0f64);
        for t in 1..=2 {
            s.get_mut(id).grad = Some(vec![g]);
            adam_step(&mut s, lr, AdamConfig::default()).unwrap();
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            w -= lr * mh / (vh.sqrt() + eps);
        }
        assert!((s.get(id).tensor.data()[0] - w).abs() < 1e-12);
    }

    #[test]
    fn missing_grad_is_reported() {
        let mut s = scalar_store(1.0);
        let err = adam_step(&mut s, 0.1, AdamConfig::default()).unwrap_err();
        assert!(matches!(err, AutodiffError::MissingGrad(ref n) if n == "w"));
    }
}
