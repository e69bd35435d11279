//! Adam with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::linear::{Affine, LinearGrads};
use crate::numeric::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::BadSpec(format!(
                "adam betas must lie in (0,1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.lr >= 0.0 && self.weight_decay >= 0.0 && self.eps > 0.0) || !self.lr.is_finite() {
            return Err(Error::BadSpec(
                "adam lr, eps and weight decay must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Moment buffers for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            config,
        }
    }

    pub fn update(&mut self, param: &mut [f64], grad: &[f64]) -> Result<()> {
        if param.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::shape(
                format!("parameter and gradient of length {}", self.m.len()),
                format!("{} and {}", param.len(), grad.len()),
            ));
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (((p, &g), m), v) in param.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * *p);
        }
        Ok(())
    }
}

pub fn adam_step(param: &mut Matrix, grad: &Matrix, state: &mut AdamState) -> Result<()> {
    if param.shape() != grad.shape() {
        return Err(Error::shape(
            format!("{:?}", param.shape()),
            format!("{:?}", grad.shape()),
        ));
    }
    state.update(param.as_mut_slice(), grad.as_slice())
}

/// Adam state for both tensors of an affine layer.
#[derive(Debug, Clone)]
pub struct AffineAdam {
    weight: AdamState,
    bias: AdamState,
}

impl AffineAdam {
    pub fn new(layer: &Affine, config: AdamConfig) -> Self {
        Self {
            weight: AdamState::new(layer.weight.rows() * layer.weight.cols(), config),
            bias: AdamState::new(layer.bias.len(), config),
        }
    }

    pub fn step(&mut self, layer: &mut Affine, grads: &LinearGrads) -> Result<()> {
        adam_step(&mut layer.weight, &grads.weight, &mut self.weight)?;
        self.bias.update(&mut layer.bias, &grads.bias)
    }
}
