//! Group-relative policy optimization: sampling, advantage estimation,
//! the clipped surrogate objective with KL penalty, optimizer, schedule,
//! and the training loop, over a pluggable policy.

pub mod advantage;
pub mod objective;
pub mod optimizer;
pub mod policy;
pub mod schedule;
pub mod toy;
pub mod trainer;

pub use advantage::{group_advantages, group_advantages_with_mode, Advantages, AdvantageStdMode};
pub use objective::{clipped_term, grpo_objective, kl_estimate, surrogate_gradient, token_ratio};
pub use policy::{Completion, FeatureVector, GroupSample, Policy, SamplingParams, TokenId};
pub use schedule::cosine_lr;
pub use toy::ToyPolicy;
pub use trainer::{Checkpoint, StepReport, TrainError, TrainSummary, Trainer};

use serde::{Deserialize, Serialize};

use crate::rewards::PartialRewardMode;

/// Every training hyperparameter.
///
/// Defaults are the published large-model settings. [`TrainConfig::toy`]
/// swaps in values sized for the built-in ~4k-parameter policy, where the
/// large-model learning rate produces no visible learning within a
/// desk-scale budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub group_size: usize,
    pub max_steps: u64,
    pub learning_rate: f64,
    pub warmup_ratio: f64,
    pub weight_decay: f64,
    pub grad_clip_norm: f64,
    pub clip_epsilon: f64,
    pub kl_beta: f64,
    pub checkpoint_every: u64,
    pub temperature: f64,
    pub top_p: f64,
    pub max_completion_tokens: usize,
    pub rng_seed: u64,
    pub advantage_std: AdvantageStdMode,
    pub partial_reward_mode: PartialRewardMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            group_size: 6,
            max_steps: 1000,
            learning_rate: 5e-6,
            warmup_ratio: 0.1,
            weight_decay: 0.1,
            grad_clip_norm: 0.1,
            clip_epsilon: 0.2,
            kl_beta: 0.04,
            checkpoint_every: 250,
            temperature: 1.0,
            top_p: 0.95,
            max_completion_tokens: 1024,
            rng_seed: 0,
            advantage_std: AdvantageStdMode::Population,
            partial_reward_mode: PartialRewardMode::Strict,
        }
    }
}

impl TrainConfig {
    /// Settings sized for the built-in toy policy.
    pub fn toy() -> TrainConfig {
        TrainConfig {
            learning_rate: 5e-3,
            max_completion_tokens: 16,
            ..TrainConfig::default()
        }
    }

    pub fn sampling_params(&self) -> SamplingParams {
        SamplingParams {
            temperature: self.temperature,
            top_p: self.top_p,
            max_tokens: self.max_completion_tokens,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.group_size < 2 {
            return Err(format!("group_size must be at least 2, got {}", self.group_size));
        }
        if !(self.learning_rate > 0.0) {
            return Err(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(format!("warmup_ratio must be in [0, 1), got {}", self.warmup_ratio));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(format!("clip_epsilon must be in (0, 1), got {}", self.clip_epsilon));
        }
        if self.kl_beta < 0.0 {
            return Err(format!("kl_beta must be non-negative, got {}", self.kl_beta));
        }
        if self.weight_decay < 0.0 {
            return Err(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        if !(self.grad_clip_norm > 0.0) {
            return Err(format!("grad_clip_norm must be positive, got {}", self.grad_clip_norm));
        }
        if !(self.temperature > 0.0) {
            return Err(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        if self.max_completion_tokens == 0 {
            return Err("max_completion_tokens must be positive".to_string());
        }
        Ok(())
    }
}
