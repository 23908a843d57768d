//! Clients for external language-model services: reasoning-quality judging
//! and synthetic narrative generation.
//!
//! Both clients are small behavioral traits so the rest of the engine never
//! touches the wire. [`stub`] holds deterministic offline implementations
//! used for reproducible runs and tests; [`http`] holds the real
//! chat-completion client with retry, backoff and rate limiting.

pub mod http;
pub mod stub;

use std::time::Duration;

use thiserror::Error;

use crate::rewards::JudgeVerdict;

#[derive(Debug, Error)]
pub enum GatewayError {
    /// The judge endpoint kept failing after the whole retry budget.
    #[error("judge unavailable after {attempts} attempts")]
    JudgeUnavailable { attempts: u32 },

    /// The generator endpoint kept failing after the whole retry budget.
    #[error("generation failed after {attempts} attempts: {detail}")]
    GenerationFailed { attempts: u32, detail: String },

    /// The generator answered with an empty body.
    #[error("generator returned an empty response")]
    EmptyResponse,

    #[error("gateway transport error: {0}")]
    Transport(String),
}

/// Grades the reasoning block of a completion against the accident
/// narrative.
pub trait JudgeClient: Send + Sync {
    fn evaluate(&self, reasoning_text: &str, narrative: &str) -> Result<JudgeVerdict, GatewayError>;
}

/// Produces a synthetic accident narrative from a few-shot prompt.
pub trait GeneratorClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError>;
}

/// Retry schedule: `budget` retries after the first attempt, exponential
/// backoff with full jitter, capped at `max_delay`.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub budget: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            budget: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; used by tests.
    pub fn immediate(budget: u32) -> RetryPolicy {
        RetryPolicy {
            budget,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    /// Jittered delay before retry number `retry` (1-based).
    fn delay_before(&self, retry: u32) -> Duration {
        let exp = self
            .base_delay
            .saturating_mul(2u32.saturating_pow(retry.saturating_sub(1)))
            .min(self.max_delay);
        if exp.is_zero() {
            return Duration::ZERO;
        }
        // Full jitter: uniform in [exp/2, exp].
        let nanos = exp.as_nanos() as u64;
        let jittered = nanos / 2 + rand::random::<u64>() % (nanos / 2 + 1);
        Duration::from_nanos(jittered)
    }

    /// Runs `op` up to `budget + 1` times, sleeping between attempts.
    /// Returns the last error and the number of attempts made.
    pub fn run<T, E>(&self, mut op: impl FnMut() -> Result<T, E>) -> Result<T, (E, u32)> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match op() {
                Ok(value) => return Ok(value),
                Err(err) => {
                    if attempts > self.budget {
                        return Err((err, attempts));
                    }
                    let delay = self.delay_before(attempts);
                    if !delay.is_zero() {
                        std::thread::sleep(delay);
                    }
                }
            }
        }
    }
}
