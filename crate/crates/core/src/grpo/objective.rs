//! The clipped surrogate objective with KL penalty, and its gradient.
//!
//! Per token: `min(ratio * A, clip(ratio, 1-eps, 1+eps) * A) - beta * kl`
//! where the ratio compares current to old policy, the advantage is the
//! completion's group-relative advantage broadcast to every token, and the
//! KL term is the non-negative estimator `exp(d) - d - 1` of divergence
//! from the reference policy, `d = logp_ref - logp_new`.

use log::warn;

use crate::grpo::policy::{GroupSample, Policy};

/// Exponent clamp guarding `exp` against overflow in ratio and KL terms.
pub const EXP_CLAMP: f64 = 50.0;

/// Probability ratio `exp(logp_new - logp_old)` with a clamped exponent.
pub fn token_ratio(logp_new: f64, logp_old: f64) -> f64 {
    (logp_new - logp_old).clamp(-EXP_CLAMP, EXP_CLAMP).exp()
}

/// Pessimistic clipped surrogate term `min(r*A, clip(r)*A)`.
pub fn clipped_term(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Non-negative per-token KL estimator `exp(d) - d - 1`, zero iff the two
/// log-probabilities agree.
pub fn kl_estimate(logp_ref: f64, logp_new: f64) -> f64 {
    let d = (logp_ref - logp_new).clamp(-EXP_CLAMP, EXP_CLAMP);
    d.exp() - d - 1.0
}

/// Value of one token's objective term and its derivative with respect to
/// `logp_new`.
///
/// The derivative of the surrogate is `ratio * advantage` while the
/// unclipped branch is active and zero once the min selects the constant
/// clip term; the KL penalty contributes `beta * (exp(d) - 1)` whenever
/// the exponent clamp is not binding.
pub fn token_term_and_weight(
    logp_new: f64,
    logp_old: f64,
    logp_ref: f64,
    advantage: f64,
    eps: f64,
    beta: f64,
) -> (f64, f64) {
    let delta_ratio = logp_new - logp_old;
    let ratio = delta_ratio.clamp(-EXP_CLAMP, EXP_CLAMP).exp();
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    let unclipped_value = ratio * advantage;
    let clipped_value = clipped * advantage;
    let surrogate = unclipped_value.min(clipped_value);

    let mut weight = if unclipped_value <= clipped_value && delta_ratio.abs() < EXP_CLAMP {
        ratio * advantage
    } else {
        0.0
    };

    let d = logp_ref - logp_new;
    let dc = d.clamp(-EXP_CLAMP, EXP_CLAMP);
    let kl = dc.exp() - dc - 1.0;
    if d.abs() < EXP_CLAMP {
        weight += beta * (dc.exp() - 1.0);
    }

    (surrogate - beta * kl, weight)
}

/// Mean over completions of the length-normalized token-term sums.
///
/// Empty completions are excluded before evaluation, with a logged
/// warning; the advantage of completion `i` is broadcast to each of its
/// tokens.
pub fn grpo_objective(group: &GroupSample, eps: f64, beta: f64) -> f64 {
    let mut total = 0.0;
    let mut included = 0usize;
    for i in 0..group.group_size() {
        let len = group.completions[i].tokens.len();
        if len == 0 {
            warn!("excluding empty completion {i} from objective");
            continue;
        }
        included += 1;
        let mut seq_sum = 0.0;
        for t in 0..len {
            let (term, _) = token_term_and_weight(
                group.logp_new[i][t],
                group.logp_old[i][t],
                group.logp_ref[i][t],
                group.advantages[i],
                eps,
                beta,
            );
            seq_sum += term;
        }
        total += seq_sum / len as f64;
    }
    if included == 0 {
        0.0
    } else {
        total / included as f64
    }
}

/// Exact gradient of [`grpo_objective`] with respect to the current
/// policy's parameters. `logp_new` is refreshed from `policy` first.
pub fn surrogate_gradient<P: Policy>(
    policy: &P,
    group: &mut GroupSample,
    eps: f64,
    beta: f64,
) -> Vec<f64> {
    group.refresh_new_logprobs(policy);
    let included: Vec<usize> = (0..group.group_size())
        .filter(|&i| !group.completions[i].tokens.is_empty())
        .collect();
    if included.is_empty() {
        return vec![0.0; policy.param_count()];
    }
    let group_scale = 1.0 / included.len() as f64;

    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(included.len());
    for &i in &included {
        let len = group.completions[i].tokens.len();
        let seq_scale = group_scale / len as f64;
        let mut w = Vec::with_capacity(len);
        for t in 0..len {
            let (_, weight) = token_term_and_weight(
                group.logp_new[i][t],
                group.logp_old[i][t],
                group.logp_ref[i][t],
                group.advantages[i],
                eps,
                beta,
            );
            w.push(weight * seq_scale);
        }
        weights.push(w);
    }

    let sequences: Vec<(&[crate::grpo::policy::TokenId], &[f64])> = included
        .iter()
        .zip(&weights)
        .map(|(&i, w)| (group.completions[i].tokens.as_slice(), w.as_slice()))
        .collect();
    policy.weighted_logprob_grad(&group.features, &sequences)
}
