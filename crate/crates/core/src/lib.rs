//! A desk-scale reinforcement-learning engine for multi-label HFACS
//! classification of aviation accident narratives.
//!
//! The engine covers the full training pipeline: a composite five-part
//! reward over parsed completions, group-relative advantage estimation
//! with a clipped surrogate objective and KL penalty, constrained
//! splitting and per-code balancing with synthetic augmentation, and the
//! multi-label evaluation battery. A built-in ~4k-parameter policy stands
//! in for a large language model so every numerical path can be exercised
//! and verified on a laptop; external judge and generator services hide
//! behind small client traits with deterministic offline stubs.

pub mod artifact;
pub mod data;
pub mod gateway;
pub mod grpo;
pub mod metrics;
pub mod parsing;
pub mod rewards;
pub mod seeding;
pub mod taxonomy;
pub mod telemetry;

pub use data::{load_dataset, split_train_test, AccidentRecord, DataError, SplitSpec};
pub use grpo::{ToyPolicy, TrainConfig, Trainer};
pub use metrics::{evaluate, EvalReport};
pub use parsing::{parse_completion, ParsedCompletion};
pub use rewards::{total_reward, RewardBreakdown, RewardEngine};
pub use taxonomy::{all_codes, is_valid_code, parse_label_string, HfacsCode, LabelSet};
