//! The pluggable policy contract and the group-sample container.

use serde::{Deserialize, Serialize};

use crate::seeding;

pub type TokenId = u16;

/// Dense prompt representation a policy consumes. How a narrative becomes
/// features is the policy's own business (see `Policy::featurize`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    /// Nucleus cutoff; 1.0 disables truncation.
    pub top_p: f64,
    pub max_tokens: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 1.0,
            top_p: 0.95,
            max_tokens: 1024,
        }
    }
}

/// One sampled completion: tokens, their log-probabilities under the
/// sampling policy's full (untruncated) distribution, and decoded text.
#[derive(Debug, Clone)]
pub struct Completion {
    pub tokens: Vec<TokenId>,
    pub logprobs: Vec<f64>,
    pub text: String,
}

/// Behavioral contract for a trainable autoregressive policy.
///
/// Log-probabilities are always reported under the policy's own full
/// softmax distribution, independent of sampling temperature and nucleus
/// truncation, so `logprobs` of a freshly sampled sequence reproduces the
/// sampling-time values exactly.
pub trait Policy: Clone {
    /// Turns a narrative into this policy's feature representation.
    fn featurize(&self, narrative: &str) -> FeatureVector;

    /// Samples `group_size` completions for one prompt. Each completion
    /// draws from an independent RNG stream derived from `(seed, index)`,
    /// so results are reproducible and order-independent.
    fn sample_group(
        &self,
        features: &FeatureVector,
        group_size: usize,
        sampling: &SamplingParams,
        seed: u64,
    ) -> Vec<Completion>;

    /// Per-token log-probabilities of `tokens` under current parameters.
    fn logprobs(&self, features: &FeatureVector, tokens: &[TokenId]) -> Vec<f64>;

    /// Decoded text of a token sequence.
    fn decode(&self, tokens: &[TokenId]) -> String;

    /// Frozen copy usable as an old or reference policy.
    fn snapshot(&self) -> Self {
        self.clone()
    }

    fn param_count(&self) -> usize;

    /// Flat copy of all parameters, in a stable order.
    fn params(&self) -> Vec<f64>;

    fn set_params(&mut self, params: &[f64]);

    /// Adds `delta` to the flat parameter vector.
    fn apply_update(&mut self, delta: &[f64]);

    /// Gradient of `sum over sequences s, positions t of
    /// weights[s][t] * log pi(tokens[s][t] | prefix)` with respect to the
    /// flat parameter vector.
    fn weighted_logprob_grad(
        &self,
        features: &FeatureVector,
        sequences: &[(&[TokenId], &[f64])],
    ) -> Vec<f64>;
}

/// Derives the per-completion sampling seed from the group seed.
pub fn completion_seed(group_seed: u64, completion_index: usize) -> u64 {
    seeding::derive(group_seed, &[0x636f6d70, completion_index as u64])
}

/// Everything the objective needs about one prompt's group of completions.
///
/// All completions were drawn from the same old-policy snapshot for the
/// same prompt; `logp_new` is refreshed from the current policy before the
/// objective or its gradient is evaluated.
#[derive(Debug, Clone)]
pub struct GroupSample {
    pub features: FeatureVector,
    pub completions: Vec<Completion>,
    pub logp_new: Vec<Vec<f64>>,
    pub logp_old: Vec<Vec<f64>>,
    pub logp_ref: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub degenerate: bool,
}

impl GroupSample {
    pub fn group_size(&self) -> usize {
        self.completions.len()
    }

    /// Recomputes `logp_new` under `policy`.
    pub fn refresh_new_logprobs<P: Policy>(&mut self, policy: &P) {
        self.logp_new = self
            .completions
            .iter()
            .map(|c| policy.logprobs(&self.features, &c.tokens))
            .collect();
    }
}
