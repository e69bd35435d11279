//! Training hyperparameters. The `*_default` constructors carry the
//! published settings for each stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::AdamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SparsifierKind {
    /// Keep the k largest pre-activations.
    TopK,
    /// ReLU activations with an L1 penalty.
    L1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Active neurons per representation.
    pub k: usize,
    /// Hidden width as a multiple of the input dimension.
    pub hidden_ratio: usize,
    /// InfoNCE temperature.
    pub tau: f64,
    pub sparsifier: SparsifierKind,
    pub l1_coeff: f64,
    /// Re-draw encoder rows whose norm collapses below 1e-8.
    pub resuscitate_dead: bool,
    pub seed: u64,
}

pub const DEFAULT_TAU: f64 = 0.07;
pub const DEFAULT_HIDDEN_RATIO: usize = 8;
pub const DEFAULT_K: usize = 256;
pub const DEFAULT_L1_COEFF: f64 = 1e-4;

impl TrainConfig {
    /// Auxiliary alignment autoencoder: 50 epochs, batch 2048, lr 5e-5,
    /// weight decay 0.01, τ = 0.07.
    pub fn align_default() -> Self {
        Self {
            epochs: 50,
            batch_size: 2048,
            lr: 5e-5,
            weight_decay: 0.01,
            k: DEFAULT_K,
            hidden_ratio: DEFAULT_HIDDEN_RATIO,
            tau: DEFAULT_TAU,
            sparsifier: SparsifierKind::TopK,
            l1_coeff: DEFAULT_L1_COEFF,
            resuscitate_dead: true,
            seed: 0,
        }
    }

    /// Sparse autoencoder: 10 epochs, batch 512, lr 1e-4.
    pub fn sae_default() -> Self {
        Self {
            epochs: 10,
            batch_size: 512,
            lr: 1e-4,
            weight_decay: 0.0,
            ..Self::align_default()
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::BadSpec("batch size must be positive".into()));
        }
        if self.k == 0 {
            return Err(Error::BadSpec("k must be at least 1".into()));
        }
        if self.hidden_ratio == 0 {
            return Err(Error::BadSpec("hidden ratio must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::BadSpec(format!(
                "temperature must be positive, got {}",
                self.tau
            )));
        }
        if !(self.l1_coeff >= 0.0 && self.l1_coeff.is_finite()) {
            return Err(Error::BadSpec("l1 coefficient must be finite and non-negative".into()));
        }
        self.adam().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TrainConfig::align_default().validate().unwrap();
        TrainConfig::sae_default().validate().unwrap();
        assert_eq!(TrainConfig::sae_default().batch_size, 512);
        assert_eq!(TrainConfig::align_default().tau, 0.07);
    }

    #[test]
    fn rejects_nonpositive_tau() {
        let c = TrainConfig {
            tau: 0.0,
            ..TrainConfig::align_default()
        };
        assert!(c.validate().is_err());
    }
}
