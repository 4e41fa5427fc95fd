//! MAPPO: recurrent decentralized actors, centralized critics, GAE and the
//! clipped PPO update, with intrinsic rewards computed online during
//! rollouts.

mod gae;
mod networks;
mod policy;
mod ppo;
mod rollout;
mod runner;

pub use gae::{compute_gae, normalize_advantages, ValueNorm};
pub use networks::{Actor, ActorTrace, Critic, HIDDEN_GAIN, POLICY_OUTPUT_GAIN, VALUE_OUTPUT_GAIN};
pub use policy::{JointPolicy, Policies, PolicyRunner, Role, RoleKind, ScriptedPolicy};
pub use ppo::{actor_loss_grad, critic_loss_grad, ppo_update, prepare_advantages, ActorLossStats, CriticLossStats, UpdateStats};
pub use rollout::{collect_rollout, evaluate, record_trace, DiagnosticRecord, EvalResult, RolloutBuffer, Sequence};
pub use runner::{
    evaluate_checkpoint, latest_checkpoint, load_run_checkpoint, metrics_header, read_manifest, trace_checkpoint, Checkpoint,
    Manifest, MetricsRow, Seeds, Trainer, CHECKPOINT_DIR, CHECKPOINT_VERSION, DIAGNOSTICS_FILE, MANIFEST_FILE, METRICS_FILE,
    METRICS_HEADER,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoHyper {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    /// Steps per minibatch, rounded up to whole episodes.
    pub minibatch_size: usize,
    pub rollout_steps: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub normalize_advantages: bool,
    pub value_norm: bool,
    /// Bounds applied to the trainable log standard deviation after every
    /// optimizer step.
    pub log_std_min: f64,
    pub log_std_max: f64,
}

impl Default for PpoHyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            epochs: 10,
            entropy_coef: 0.01,
            max_grad_norm: 1.0,
            minibatch_size: 32,
            rollout_steps: 1200,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            normalize_advantages: true,
            value_norm: true,
            log_std_min: -5.0,
            log_std_max: 0.0,
        }
    }
}

impl PpoHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("ppo.{m}")));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.gae_lambda) && self.gae_lambda != 1.0 {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("clip must be positive");
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.rollout_steps == 0 {
            return bad("epochs, minibatch_size and rollout_steps must be positive");
        }
        if !(self.actor_lr > 0.0) || !(self.critic_lr > 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("learning rates and max_grad_norm must be positive");
        }
        if !(self.entropy_coef >= 0.0) {
            return bad("entropy_coef must be non-negative");
        }
        if !(self.log_std_min < self.log_std_max) {
            return bad("log_std_min must be below log_std_max");
        }
        Ok(())
    }

    /// Episodes per rollout; the rollout must hold whole episodes.
    pub fn episodes_per_rollout(&self, episode_length: usize) -> Result<usize> {
        if self.rollout_steps % episode_length != 0 {
            return Err(Error::Config(format!(
                "ppo.rollout_steps ({}) must be a multiple of the episode length ({episode_length})",
                self.rollout_steps
            )));
        }
        Ok(self.rollout_steps / episode_length)
    }

    /// Whole episodes per minibatch (at least one).
    pub fn episodes_per_minibatch(&self, episode_length: usize) -> usize {
        self.minibatch_size.div_ceil(episode_length).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub checkpoint_every: usize,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 400,
            actor_hidden: vec![128, 128],
            critic_hidden: vec![128, 128],
            checkpoint_every: 10,
            eval_episodes: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("train.iterations must be positive".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Config("train.checkpoint_every must be positive".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("train.eval_episodes must be positive".into()));
        }
        if self.actor_hidden.is_empty() || self.actor_hidden.contains(&0) {
            return Err(Error::Config("train.actor_hidden must be non-empty and positive".into()));
        }
        if self.critic_hidden.is_empty() || self.critic_hidden.contains(&0) {
            return Err(Error::Config("train.critic_hidden must be non-empty and positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn episode_arithmetic() {
        let h = PpoHyper::default();
        assert_eq!(h.episodes_per_rollout(50).unwrap(), 24);
        assert_eq!(h.episodes_per_rollout(80).unwrap(), 15);
        assert!(h.episodes_per_rollout(70).is_err());
        assert_eq!(h.episodes_per_minibatch(50), 1);
        assert_eq!(h.episodes_per_minibatch(25), 2);
        assert_eq!(h.episodes_per_minibatch(10), 4);
    }

    #[test]
    fn defaults_validate() {
        PpoHyper::default().validate().unwrap();
        TrainConfig::default().validate().unwrap();
    }
}
