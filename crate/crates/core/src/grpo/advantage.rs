//! Group-relative advantage estimation.
//!
//! Each completion's advantage is its reward standardized by the group's
//! mean and standard deviation. The group is the whole population of
//! interest, so the population standard deviation is the default; the
//! sample (n-1) variant is available as a switch.

use serde::{Deserialize, Serialize};

/// Groups whose reward spread falls below this threshold are treated as
/// zero-variance: they get all-zero advantages instead of an epsilon
/// denominator, which would amplify float noise into large fake advantages.
pub const DEGENERATE_STD_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdvantageStdMode {
    #[default]
    Population,
    Sample,
}

/// Advantages for one group, with the zero-variance flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    pub values: Vec<f64>,
    /// True when the zero-variance branch fired. Not an error: a
    /// degenerate group simply contributes no surrogate update.
    pub degenerate: bool,
}

/// Standardizes rewards within the group using the population standard
/// deviation.
pub fn group_advantages(rewards: &[f64]) -> Advantages {
    group_advantages_with_mode(rewards, AdvantageStdMode::Population)
}

pub fn group_advantages_with_mode(rewards: &[f64], mode: AdvantageStdMode) -> Advantages {
    assert!(
        rewards.len() >= 2,
        "group-relative advantages need at least 2 rewards, got {}",
        rewards.len()
    );
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let sum_sq: f64 = rewards.iter().map(|r| (r - mean) * (r - mean)).sum();
    let denom = match mode {
        AdvantageStdMode::Population => n,
        AdvantageStdMode::Sample => n - 1.0,
    };
    let std = (sum_sq / denom).sqrt();
    if std < DEGENERATE_STD_THRESHOLD {
        return Advantages {
            values: vec![0.0; rewards.len()],
            degenerate: true,
        };
    }
    Advantages {
        values: rewards.iter().map(|r| (r - mean) / std).collect(),
        degenerate: false,
    }
}
