//! Adam optimizer with bias correction.

use std::collections::BTreeMap;

use crate::{Array, Error, Result};

/// First/second moment accumulators for one parameter tensor.
#[derive(Debug, Clone)]
pub struct MomentState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// Adam with per-parameter moment state keyed by parameter name.
///
/// Update (step count t, bias-corrected):
///   m ← β1·m + (1−β1)·g;  v ← β2·v + (1−β2)·g²
///   θ ← θ − lr · m̂ / (√v̂ + ε)
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    state: BTreeMap<String, MomentState>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            state: BTreeMap::new(),
        }
    }

    /// Adam with the usual defaults for everything but the learning rate.
    pub fn with_lr(lr: f64) -> Self {
        Self::new(lr, 0.9, 0.999, 1e-8)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update across a set of named parameters. Parameters without
    /// a gradient entry are left untouched. The step counter advances once
    /// per call.
    pub fn step(
        &mut self,
        params: &mut BTreeMap<String, Array>,
        grads: &BTreeMap<String, Array>,
    ) -> Result<()> {
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for (name, grad) in grads {
            let Some(param) = params.get_mut(name) else {
                return Err(Error::Config(format!(
                    "adam: gradient for unknown parameter '{name}'"
                )));
            };
            if param.shape() != grad.shape() {
                return Err(Error::ShapeMismatch {
                    op: "adam_step",
                    lhs: param.shape().to_vec(),
                    rhs: grad.shape().to_vec(),
                });
            }
            let n = param.numel();
            let state = self.state.entry(name.clone()).or_insert_with(|| MomentState {
                m: vec![0.0; n],
                v: vec![0.0; n],
            });
            let p = param.data_mut();
            let g = grad.data();
            for i in 0..n {
                state.m[i] = self.beta1 * state.m[i] + (1.0 - self.beta1) * g[i];
                state.v[i] = self.beta2 * state.v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = state.m[i] / bc1;
                let v_hat = state.v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
