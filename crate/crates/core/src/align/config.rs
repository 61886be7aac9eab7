use serde::{Deserialize, Serialize};

use super::ProjectorMode;
use crate::encoders::{Arch, TsConvGeometry};
use crate::error::{Error, Result};

/// Training hyperparameters. Defaults: AdamW, lr 1e-4, wd 1e-4, batch 1024,
/// 50 epochs, dropout 0.3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Initial temperature τ (learned in log space).
    pub initial_tau: f64,
    /// Floor on τ.
    pub min_tau: f64,
    pub dropout_p: f64,
    pub seed: u64,
    /// Encoder output width `D`.
    pub embed_dim: usize,
    /// Shared latent width `d_s`.
    pub shared_dim: usize,
    pub arch: Arch,
    pub projector: ProjectorMode,
    pub tsconv: TsConvGeometry,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            weight_decay: 1e-4,
            batch_size: 1024,
            epochs: 50,
            initial_tau: 0.07,
            min_tau: 0.01,
            dropout_p: 0.3,
            seed: 0,
            embed_dim: 1024,
            shared_dim: 1024,
            arch: Arch::EegProject,
            projector: ProjectorMode::Linear,
            tsconv: TsConvGeometry::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let rate_ok = |v: f64| v.is_finite() && v >= 0.0;
        if !rate_ok(self.learning_rate) || !rate_ok(self.weight_decay) {
            return bad("learning rate and weight decay must be finite and non-negative".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(self.initial_tau > 0.0 && self.initial_tau.is_finite()) || !(self.min_tau > 0.0) || self.initial_tau < self.min_tau {
            return bad(format!(
                "need 0 < min_tau ≤ initial_tau, got {} and {}",
                self.min_tau, self.initial_tau
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout_p));
        }
        if self.embed_dim < 2 || self.shared_dim == 0 {
            return bad("embed_dim must be ≥ 2 and shared_dim positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: TrainConfig = serde_json::from_str(r#"{"epochs": 3, "arch": "tsconv"}"#).unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.arch, Arch::TsConv);
        assert_eq!(cfg.batch_size, 1024);
        assert_eq!(cfg.learning_rate, 1e-4);
        cfg.validate().unwrap();
    }

    #[test]
    fn negative_rate_rejected() {
        let cfg = TrainConfig {
            learning_rate: -1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            learning_rate: f64::INFINITY,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
