//! The training loop: snapshot, sample a group, score, normalize, update.

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::prompts::build_chat_prompt;
use crate::data::AccidentRecord;
use crate::grpo::advantage::group_advantages_with_mode;
use crate::grpo::objective::{grpo_objective, surrogate_gradient};
use crate::grpo::optimizer::{clip_global_norm, AdamW};
use crate::grpo::policy::{GroupSample, Policy};
use crate::grpo::schedule::cosine_lr;
use crate::grpo::TrainConfig;
use crate::rewards::{RewardBreakdown, RewardEngine};
use crate::seeding;
use crate::telemetry::{CurveRow, TelemetryWriter};

const STEP_TAG: u64 = 0x73746570;
const EPOCH_TAG: u64 = 0x65706f63;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),

    #[error("training dataset is empty")]
    EmptyDataset,

    #[error("sink I/O failure: {0}")]
    Sink(#[from] io::Error),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

/// Everything logged about one completion of one step.
#[derive(Debug, Clone)]
pub struct CompletionReport {
    pub raw: String,
    pub token_count: usize,
    pub parsed_codes: String,
    pub reward: RewardBreakdown,
    pub advantage: f64,
}

/// Everything logged about one training step.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub step: u64,
    pub ev_id: String,
    pub prompt_digest: String,
    pub completions: Vec<CompletionReport>,
    pub objective: f64,
    pub grad_norm: f64,
    pub learning_rate: f64,
    pub degenerate: bool,
}

impl StepReport {
    pub fn mean_total(&self) -> f64 {
        let n = self.completions.len().max(1) as f64;
        self.completions.iter().map(|c| c.reward.total).sum::<f64>() / n
    }
}

/// Summary returned by a full run.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub steps_run: u64,
    pub curve: Vec<CurveRow>,
    pub checkpoints: Vec<PathBuf>,
}

/// Serialized training state: policy and reference parameters plus
/// optimizer moments, tagged with the config digest and step number.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_digest: String,
    pub step: u64,
    pub params: Vec<f64>,
    pub reference_params: Vec<f64>,
    pub optimizer: AdamW,
}

pub const CHECKPOINT_VERSION: u32 = 1;

pub fn checkpoint_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("checkpoint_{step:06}.json"))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, TrainError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))?;
    let ckpt: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(TrainError::Checkpoint(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            ckpt.version
        )));
    }
    Ok(ckpt)
}

/// Most recent checkpoint file in `dir`, by step number.
pub fn latest_checkpoint(dir: &Path) -> Option<PathBuf> {
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in std::fs::read_dir(dir).ok()? {
        let path = entry.ok()?.path();
        let name = path.file_name()?.to_str()?;
        if let Some(step_str) = name
            .strip_prefix("checkpoint_")
            .and_then(|s| s.strip_suffix(".json"))
        {
            if let Ok(step) = step_str.parse::<u64>() {
                if best.as_ref().map(|(s, _)| step > *s).unwrap_or(true) {
                    best = Some((step, path));
                }
            }
        }
    }
    best.map(|(_, path)| path)
}

/// Order of prompt indices within one epoch, reshuffled per epoch.
fn epoch_order(seed: u64, epoch: u64, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng =
        rand_chacha::ChaCha8Rng::seed_from_u64(seeding::derive(seed, &[EPOCH_TAG, epoch]));
    order.shuffle(&mut rng);
    order
}

/// Dataset index used at 1-based `step`. Stateless, so resumed runs pick
/// the same prompts.
pub fn prompt_index_for_step(seed: u64, step: u64, n: usize) -> usize {
    let epoch = (step - 1) / n as u64;
    let pos = ((step - 1) % n as u64) as usize;
    epoch_order(seed, epoch, n)[pos]
}

/// Owns the policy being trained, its frozen reference snapshot, and the
/// optimizer state.
pub struct Trainer<P: Policy> {
    policy: P,
    reference: P,
    optimizer: AdamW,
    config: TrainConfig,
    completed_steps: u64,
}

impl<P: Policy> Trainer<P> {
    /// Starts a fresh run; the reference policy is the initial snapshot
    /// and is never refreshed.
    pub fn new(policy: P, config: TrainConfig) -> Result<Trainer<P>, TrainError> {
        config.validate().map_err(TrainError::Config)?;
        let optimizer = AdamW::new(policy.param_count(), config.weight_decay);
        let reference = policy.snapshot();
        Ok(Trainer {
            policy,
            reference,
            optimizer,
            config,
            completed_steps: 0,
        })
    }

    /// Restores a run from a checkpoint. `template` supplies the policy
    /// architecture; its parameters are overwritten.
    pub fn from_checkpoint(
        mut template: P,
        checkpoint: &Checkpoint,
        config: TrainConfig,
    ) -> Result<Trainer<P>, TrainError> {
        config.validate().map_err(TrainError::Config)?;
        if checkpoint.params.len() != template.param_count() {
            return Err(TrainError::Checkpoint(format!(
                "checkpoint has {} parameters, policy expects {}",
                checkpoint.params.len(),
                template.param_count()
            )));
        }
        template.set_params(&checkpoint.params);
        let mut reference = template.clone();
        reference.set_params(&checkpoint.reference_params);
        Ok(Trainer {
            policy: template,
            reference,
            optimizer: checkpoint.optimizer.clone(),
            config,
            completed_steps: checkpoint.step,
        })
    }

    pub fn policy(&self) -> &P {
        &self.policy
    }

    pub fn reference(&self) -> &P {
        &self.reference
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn completed_steps(&self) -> u64 {
        self.completed_steps
    }

    pub fn checkpoint(&self, config_digest: &str) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config_digest: config_digest.to_string(),
            step: self.completed_steps,
            params: self.policy.params(),
            reference_params: self.reference.params(),
            optimizer: self.optimizer.clone(),
        }
    }

    pub fn save_checkpoint(&self, dir: &Path, config_digest: &str) -> Result<PathBuf, TrainError> {
        std::fs::create_dir_all(dir)?;
        let path = checkpoint_path(dir, self.completed_steps);
        let json = serde_json::to_string(&self.checkpoint(config_digest))
            .map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        std::fs::write(&path, json)?;
        Ok(path)
    }

    /// One full GRPO step on one prompt: snapshot the old policy, sample a
    /// group, score it, normalize rewards into advantages, and take one
    /// clipped-surrogate ascent step.
    pub fn train_step(&mut self, record: &AccidentRecord, engine: &RewardEngine) -> StepReport {
        let step = self.completed_steps + 1;
        let config = self.config.clone();
        let old_policy = self.policy.snapshot();
        let features = self.policy.featurize(&record.narrative);
        let group_seed = seeding::derive(config.rng_seed, &[STEP_TAG, step]);
        let completions = old_policy.sample_group(
            &features,
            config.group_size,
            &config.sampling_params(),
            group_seed,
        );

        let breakdowns: Vec<RewardBreakdown> = completions
            .iter()
            .map(|c| engine.score(&c.text, &record.labels, &record.narrative))
            .collect();
        let rewards: Vec<f64> = breakdowns.iter().map(|b| b.total).collect();
        let advantages = group_advantages_with_mode(&rewards, config.advantage_std);

        let logp_old: Vec<Vec<f64>> = completions.iter().map(|c| c.logprobs.clone()).collect();
        let logp_ref: Vec<Vec<f64>> = completions
            .iter()
            .map(|c| self.reference.logprobs(&features, &c.tokens))
            .collect();
        let mut group = GroupSample {
            features,
            completions,
            logp_new: Vec::new(),
            logp_old,
            logp_ref,
            rewards,
            advantages: advantages.values.clone(),
            degenerate: advantages.degenerate,
        };

        let ascent = surrogate_gradient(
            &self.policy,
            &mut group,
            config.clip_epsilon,
            config.kl_beta,
        );
        let objective = grpo_objective(&group, config.clip_epsilon, config.kl_beta);

        let mut descent: Vec<f64> = ascent.iter().map(|g| -g).collect();
        let grad_norm = clip_global_norm(&mut descent, config.grad_clip_norm);
        let learning_rate = cosine_lr(step, &config);
        let delta = self
            .optimizer
            .step_delta(&self.policy.params(), &descent, learning_rate);
        self.policy.apply_update(&delta);
        self.completed_steps = step;

        let prompt_digest = build_chat_prompt(&record.narrative).digest();
        let completions = group
            .completions
            .iter()
            .zip(&breakdowns)
            .zip(&group.advantages)
            .map(|((c, reward), advantage)| CompletionReport {
                raw: c.text.clone(),
                token_count: c.tokens.len(),
                parsed_codes: crate::parsing::parse_completion(&c.text)
                    .predicted
                    .to_label_string(),
                reward: *reward,
                advantage: *advantage,
            })
            .collect();

        StepReport {
            step,
            ev_id: record.ev_id.clone(),
            prompt_digest,
            completions,
            objective,
            grad_norm,
            learning_rate,
            degenerate: group.degenerate,
        }
    }

    /// Runs from the current step to `max_steps` over shuffled prompts,
    /// streaming telemetry and checkpointing every `checkpoint_every`
    /// steps. Fully deterministic given the seed and a stub judge.
    pub fn train(
        &mut self,
        dataset: &[AccidentRecord],
        engine: &RewardEngine,
        mut telemetry: Option<&mut TelemetryWriter>,
        checkpoint_dir: Option<&Path>,
        config_digest: &str,
    ) -> Result<TrainSummary, TrainError> {
        if dataset.is_empty() && self.config.max_steps > 0 {
            return Err(TrainError::EmptyDataset);
        }
        let mut curve = Vec::new();
        let mut checkpoints = Vec::new();
        let first = self.completed_steps + 1;
        for step in first..=self.config.max_steps {
            let idx = prompt_index_for_step(self.config.rng_seed, step, dataset.len());
            let report = self.train_step(&dataset[idx], engine);
            curve.push(CurveRow::from_report(&report));
            if let Some(writer) = telemetry.as_deref_mut() {
                writer.write_step(&report)?;
            }
            if self.config.checkpoint_every > 0 && step % self.config.checkpoint_every == 0 {
                if let Some(dir) = checkpoint_dir {
                    checkpoints.push(self.save_checkpoint(dir, config_digest)?);
                }
            }
        }
        if let Some(writer) = telemetry.as_deref_mut() {
            writer.flush()?;
        }
        Ok(TrainSummary {
            steps_run: self.completed_steps,
            curve,
            checkpoints,
        })
    }
}
