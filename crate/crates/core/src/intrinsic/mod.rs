//! Intrinsic rewards: local observation entropy (OEM), counterfactual
//! conditional likelihood (CCL), their mixture, and saliency gating.

mod ccl;
mod combine;
mod engine;
mod memory;
mod oem;

pub use ccl::{ccl_raw, ccl_raw_detailed, ccl_rewards_step, shape_ccl, softplus, CclKDiagnostics, CclStep, CclStepDiagnostics};
pub use combine::combine_rewards;
pub use engine::{IntrinsicEngine, IntrinsicStep};
pub use memory::{AgentObservationHistory, EpisodicJointMemory};
pub use oem::oem_reward;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Ccl,
    Oem,
    Mixture,
    None,
}

impl RewardMode {
    pub fn uses_ccl(self) -> bool {
        matches!(self, RewardMode::Ccl | RewardMode::Mixture)
    }

    pub fn uses_oem(self) -> bool {
        matches!(self, RewardMode::Oem | RewardMode::Mixture)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RewardMode::Ccl => "ccl",
            RewardMode::Oem => "oem",
            RewardMode::Mixture => "mixture",
            RewardMode::None => "none",
        }
    }
}

/// How the saliency multiplier V is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaliencyMode {
    /// POI value when inside a POI's observation radius, otherwise 0.
    PoiGated,
    /// V = 1 everywhere.
    ConstantOne,
}

/// Whether multi-k averaging happens on raw digamma differences (then one
/// Softplus) or on already-shaped values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapingOrder {
    AverageThenShape,
    ShapeThenAverage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntrinsicConfig {
    pub mode: RewardMode,
    pub k_set: Vec<usize>,
    pub beta: f64,
    pub cap: f64,
    pub alpha: f64,
    pub saliency: SaliencyMode,
    pub embed_dim: usize,
    pub shaping_order: ShapingOrder,
    pub shared_encoder: bool,
}

impl Default for IntrinsicConfig {
    fn default() -> Self {
        Self {
            mode: RewardMode::Ccl,
            k_set: vec![3, 5, 7],
            beta: 1.0,
            cap: 5.0,
            alpha: 0.5,
            saliency: SaliencyMode::PoiGated,
            embed_dim: crate::encoder::EMBEDDING_DIM,
            shaping_order: ShapingOrder::AverageThenShape,
            shared_encoder: true,
        }
    }
}

impl IntrinsicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_set.is_empty() {
            return Err(Error::Config("intrinsic.k_set must not be empty".into()));
        }
        if self.k_set.contains(&0) {
            return Err(Error::Config("intrinsic.k_set entries must be positive".into()));
        }
        if self.k_set.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("intrinsic.k_set must be strictly ascending".into()));
        }
        if !(self.cap > 0.0) {
            return Err(Error::Config("intrinsic.cap must be positive".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config("intrinsic.beta must be positive".into()));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config("intrinsic.alpha must be non-negative".into()));
        }
        if self.embed_dim == 0 {
            return Err(Error::Config("intrinsic.embed_dim must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        IntrinsicConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_unsorted_k() {
        let cfg = IntrinsicConfig {
            k_set: vec![5, 3],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
