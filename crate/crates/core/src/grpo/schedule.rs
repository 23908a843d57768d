//! Learning-rate schedule: linear warmup into cosine decay.

use crate::grpo::TrainConfig;

/// Learning rate at `step` for a run of `config.max_steps` steps.
///
/// Linear warmup from 0 to the base rate over the first
/// `warmup_ratio * max_steps` steps, then cosine decay from the base rate
/// to 0 at the final step.
pub fn cosine_lr(step: u64, config: &TrainConfig) -> f64 {
    cosine_lr_raw(
        step,
        config.max_steps,
        config.learning_rate,
        config.warmup_ratio,
    )
}

pub fn cosine_lr_raw(step: u64, max_steps: u64, base: f64, warmup_ratio: f64) -> f64 {
    if max_steps == 0 {
        return 0.0;
    }
    let total = max_steps as f64;
    let s = (step.min(max_steps)) as f64;
    let warmup = warmup_ratio * total;
    if warmup > 0.0 && s < warmup {
        return base * s / warmup;
    }
    let progress = if total > warmup {
        (s - warmup) / (total - warmup)
    } else {
        1.0
    };
    base * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> TrainConfig {
        TrainConfig {
            max_steps: 1000,
            learning_rate: 5e-6,
            warmup_ratio: 0.1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_at_step_zero() {
        assert_eq!(cosine_lr(0, &config()), 0.0);
    }

    #[test]
    fn base_rate_at_warmup_end() {
        let c = config();
        let lr = cosine_lr(100, &c);
        assert!((lr - c.learning_rate).abs() < 1e-18, "got {lr}");
    }

    #[test]
    fn warmup_is_linear() {
        let c = config();
        let lr = cosine_lr(50, &c);
        assert!((lr - 0.5 * c.learning_rate).abs() < 1e-18);
    }

    #[test]
    fn terminal_rate_vanishes() {
        let c = config();
        let lr = cosine_lr(1000, &c);
        assert!(lr.abs() < 1e-12 * c.learning_rate, "got {lr}");
    }

    #[test]
    fn monotone_decay_after_warmup() {
        let c = config();
        let mut prev = cosine_lr(100, &c);
        for step in 101..=1000 {
            let lr = cosine_lr(step, &c);
            assert!(lr <= prev + 1e-18, "rose at step {step}");
            prev = lr;
        }
    }

    #[test]
    fn zero_total_steps_is_zero() {
        let c = TrainConfig {
            max_steps: 0,
            ..config()
        };
        assert_eq!(cosine_lr(0, &c), 0.0);
    }
}
