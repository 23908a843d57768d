//! A ~4k-parameter reference policy: two-layer tanh network over a hashed
//! bag-of-words of the narrative plus a one-hot of the previous token.
//!
//! Vocabulary (30 tokens): BOS, the reasoning tags, EOS, 16 filler words,
//! and the 10 taxonomy codes. Small enough that a seeded 500-step run
//! finishes in seconds on a laptop CPU, while exercising every part of the
//! training loop a large policy would.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::toy::TOY_KEYWORDS;
use crate::grpo::policy::{
    completion_seed, Completion, FeatureVector, Policy, SamplingParams, TokenId,
};
use crate::parsing::{CLOSE_TAG, OPEN_TAG};
use crate::seeding::fnv1a;
use crate::taxonomy::{all_codes, CODE_COUNT};

pub const VOCAB_SIZE: usize = 30;
pub const BOS_TOKEN: TokenId = 0;
pub const OPEN_TAG_TOKEN: TokenId = 1;
pub const CLOSE_TAG_TOKEN: TokenId = 2;
pub const EOS_TOKEN: TokenId = 3;
pub const FILLER_BASE: TokenId = 4;
pub const FILLER_COUNT: usize = 16;
pub const CODE_BASE: TokenId = 20;

pub const FEATURE_BINS: usize = 64;
pub const HIDDEN_DIM: usize = 32;
pub const STATE_DIM: usize = FEATURE_BINS + VOCAB_SIZE;

/// Glue words filling out the reasoning vocabulary beyond the ten dataset
/// keywords.
const GLUE_WORDS: [&str; 6] = ["the", "pilot", "aircraft", "during", "while", "weather"];

fn filler_word(index: usize) -> &'static str {
    if index < CODE_COUNT {
        TOY_KEYWORDS[index].1
    } else {
        GLUE_WORDS[index - CODE_COUNT]
    }
}

/// Decoded surface form of one token. BOS and EOS are silent.
pub fn token_str(token: TokenId) -> &'static str {
    match token {
        BOS_TOKEN | EOS_TOKEN => "",
        OPEN_TAG_TOKEN => OPEN_TAG,
        CLOSE_TAG_TOKEN => CLOSE_TAG,
        t if (FILLER_BASE..FILLER_BASE + FILLER_COUNT as TokenId).contains(&t) => {
            filler_word((t - FILLER_BASE) as usize)
        }
        t if (CODE_BASE..CODE_BASE + CODE_COUNT as TokenId).contains(&t) => {
            all_codes()[(t - CODE_BASE) as usize].as_str()
        }
        _ => panic!("token id {token} out of vocabulary"),
    }
}

/// Hashed bag-of-words features: 64-bin FNV hashing of lowercased
/// whitespace tokens, multiplicity-counted, then L2-normalized.
pub fn hash_features(narrative: &str) -> FeatureVector {
    let mut bins = vec![0.0f64; FEATURE_BINS];
    for word in narrative.split_whitespace() {
        let lower = word.to_lowercase();
        let bin = (fnv1a(lower.as_bytes()) % FEATURE_BINS as u64) as usize;
        bins[bin] += 1.0;
    }
    let norm = bins.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut bins {
            *x /= norm;
        }
    }
    FeatureVector(bins)
}

/// The toy network: state -> tanh hidden (32) -> softmax over the
/// 30-token vocabulary.
#[derive(Debug, Clone)]
pub struct ToyPolicy {
    w1: Vec<f64>, // HIDDEN_DIM x STATE_DIM, row-major
    b1: Vec<f64>, // HIDDEN_DIM
    w2: Vec<f64>, // VOCAB_SIZE x HIDDEN_DIM, row-major
    b2: Vec<f64>, // VOCAB_SIZE
}

const INIT_SCALE: f64 = 0.1;

impl ToyPolicy {
    pub fn new(seed: u64) -> ToyPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-INIT_SCALE..INIT_SCALE)).collect()
        };
        ToyPolicy {
            w1: draw(HIDDEN_DIM * STATE_DIM),
            b1: draw(HIDDEN_DIM),
            w2: draw(VOCAB_SIZE * HIDDEN_DIM),
            b2: draw(VOCAB_SIZE),
        }
    }

    fn state(features: &FeatureVector, prev: TokenId) -> Vec<f64> {
        assert_eq!(features.0.len(), FEATURE_BINS, "feature dimension mismatch");
        let mut s = vec![0.0; STATE_DIM];
        s[..FEATURE_BINS].copy_from_slice(&features.0);
        s[FEATURE_BINS + prev as usize] = 1.0;
        s
    }

    fn forward(&self, state: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut hidden = vec![0.0; HIDDEN_DIM];
        for (i, h) in hidden.iter_mut().enumerate() {
            let mut acc = self.b1[i];
            let row = &self.w1[i * STATE_DIM..(i + 1) * STATE_DIM];
            for (w, s) in row.iter().zip(state) {
                acc += w * s;
            }
            *h = acc.tanh();
        }
        let mut logits = vec![0.0; VOCAB_SIZE];
        for (k, z) in logits.iter_mut().enumerate() {
            let mut acc = self.b2[k];
            let row = &self.w2[k * HIDDEN_DIM..(k + 1) * HIDDEN_DIM];
            for (w, h) in row.iter().zip(&hidden) {
                acc += w * h;
            }
            *z = acc;
        }
        (hidden, logits)
    }

    /// Next-token distribution for a state, as probabilities.
    pub fn next_token_probs(&self, features: &FeatureVector, prev: TokenId) -> Vec<f64> {
        let (_, logits) = self.forward(&Self::state(features, prev));
        let logp = log_softmax(&logits);
        logp.iter().map(|lp| lp.exp()).collect()
    }

    fn sample_one(
        &self,
        features: &FeatureVector,
        sampling: &SamplingParams,
        rng: &mut ChaCha8Rng,
    ) -> Completion {
        let mut tokens = Vec::new();
        let mut logprobs = Vec::new();
        let mut prev = BOS_TOKEN;
        for _ in 0..sampling.max_tokens {
            let (_, logits) = self.forward(&Self::state(features, prev));
            let full_logp = log_softmax(&logits);
            let token = nucleus_sample(&logits, sampling.temperature, sampling.top_p, rng);
            tokens.push(token);
            logprobs.push(full_logp[token as usize]);
            if token == EOS_TOKEN {
                break;
            }
            prev = token;
        }
        let text = self.decode(&tokens);
        Completion {
            tokens,
            logprobs,
            text,
        }
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|z| z - log_sum).collect()
}

/// Temperature + nucleus sampling. The returned token is drawn from the
/// renormalized top-p head of the tempered distribution; callers record
/// log-probabilities under the full untempered distribution separately.
fn nucleus_sample(logits: &[f64], temperature: f64, top_p: f64, rng: &mut ChaCha8Rng) -> TokenId {
    let t = if temperature > 0.0 { temperature } else { 1.0 };
    let scaled: Vec<f64> = logits.iter().map(|z| z / t).collect();
    let logp = log_softmax(&scaled);
    let mut order: Vec<usize> = (0..logp.len()).collect();
    // Ties broken by token id so the cut is deterministic.
    order.sort_by(|&a, &b| logp[b].partial_cmp(&logp[a]).unwrap().then(a.cmp(&b)));

    let mut kept = Vec::with_capacity(logp.len());
    let mut mass = 0.0;
    for idx in order {
        let p = logp[idx].exp();
        kept.push((idx, p));
        mass += p;
        if mass >= top_p {
            break;
        }
    }

    let mut u = rng.gen::<f64>() * mass;
    for (idx, p) in &kept {
        u -= p;
        if u <= 0.0 {
            return *idx as TokenId;
        }
    }
    kept.last().expect("nucleus head is never empty").0 as TokenId
}

impl Policy for ToyPolicy {
    fn featurize(&self, narrative: &str) -> FeatureVector {
        hash_features(narrative)
    }

    fn sample_group(
        &self,
        features: &FeatureVector,
        group_size: usize,
        sampling: &SamplingParams,
        seed: u64,
    ) -> Vec<Completion> {
        (0..group_size)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(completion_seed(seed, i));
                self.sample_one(features, sampling, &mut rng)
            })
            .collect()
    }

    fn logprobs(&self, features: &FeatureVector, tokens: &[TokenId]) -> Vec<f64> {
        let mut prev = BOS_TOKEN;
        let mut out = Vec::with_capacity(tokens.len());
        for &token in tokens {
            let (_, logits) = self.forward(&Self::state(features, prev));
            let logp = log_softmax(&logits);
            out.push(logp[token as usize]);
            prev = token;
        }
        out
    }

    fn decode(&self, tokens: &[TokenId]) -> String {
        let mut text = String::new();
        for &token in tokens {
            let s = token_str(token);
            if s.is_empty() {
                continue;
            }
            if !text.is_empty() {
                text.push(' ');
            }
            text.push_str(s);
        }
        text
    }

    fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.extend_from_slice(&self.b2);
        out
    }

    fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter length mismatch");
        let mut offset = 0;
        for dst in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let len = dst.len();
            dst.copy_from_slice(&params[offset..offset + len]);
            offset += len;
        }
    }

    fn apply_update(&mut self, delta: &[f64]) {
        assert_eq!(delta.len(), self.param_count(), "update length mismatch");
        let mut offset = 0;
        for dst in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            for value in dst.iter_mut() {
                *value += delta[offset];
                offset += 1;
            }
        }
    }

    fn weighted_logprob_grad(
        &self,
        features: &FeatureVector,
        sequences: &[(&[TokenId], &[f64])],
    ) -> Vec<f64> {
        let mut g_w1 = vec![0.0; self.w1.len()];
        let mut g_b1 = vec![0.0; self.b1.len()];
        let mut g_w2 = vec![0.0; self.w2.len()];
        let mut g_b2 = vec![0.0; self.b2.len()];

        for (tokens, weights) in sequences {
            assert_eq!(tokens.len(), weights.len(), "weights must align with tokens");
            let mut prev = BOS_TOKEN;
            for (&token, &weight) in tokens.iter().zip(weights.iter()) {
                let state = Self::state(features, prev);
                let (hidden, logits) = self.forward(&state);
                let probs: Vec<f64> = {
                    let logp = log_softmax(&logits);
                    logp.iter().map(|lp| lp.exp()).collect()
                };
                if weight != 0.0 {
                    // d logp(token)/d logits = onehot(token) - softmax
                    let mut dlogits = vec![0.0; VOCAB_SIZE];
                    for (k, d) in dlogits.iter_mut().enumerate() {
                        *d = weight * ((k == token as usize) as u8 as f64 - probs[k]);
                    }
                    let mut dhidden = vec![0.0; HIDDEN_DIM];
                    for k in 0..VOCAB_SIZE {
                        let dz = dlogits[k];
                        if dz == 0.0 {
                            continue;
                        }
                        g_b2[k] += dz;
                        let row = &self.w2[k * HIDDEN_DIM..(k + 1) * HIDDEN_DIM];
                        for j in 0..HIDDEN_DIM {
                            g_w2[k * HIDDEN_DIM + j] += dz * hidden[j];
                            dhidden[j] += dz * row[j];
                        }
                    }
                    for j in 0..HIDDEN_DIM {
                        let da = dhidden[j] * (1.0 - hidden[j] * hidden[j]);
                        if da == 0.0 {
                            continue;
                        }
                        g_b1[j] += da;
                        let row = &mut g_w1[j * STATE_DIM..(j + 1) * STATE_DIM];
                        for (gw, s) in row.iter_mut().zip(&state) {
                            *gw += da * s;
                        }
                    }
                }
                prev = token;
            }
        }

        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&g_w1);
        out.extend_from_slice(&g_b1);
        out.extend_from_slice(&g_w2);
        out.extend_from_slice(&g_b2);
        out
    }
}
