//! The five reward components and their sum.
//!
//! Components: exact-match correctness (+2.0), scaled partial match,
//! format compliance (+0.25), a penalty of -0.25 per distinct hallucinated
//! code-like token, and a discrete reasoning-quality grade from a judge
//! client (0 / 0.25 / 0.5). The total is their exact sum; with no invalid
//! tokens the maximum achievable total is 2.75.

use log::warn;

use crate::gateway::JudgeClient;
use crate::parsing::{parse_completion, ParsedCompletion};
use crate::taxonomy::LabelSet;

/// Three-way reasoning-quality grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum JudgeGrade {
    Bad,
    Okay,
    Good,
}

/// A judge's grade for one reasoning block; the score is a pure function
/// of the grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JudgeVerdict {
    pub grade: JudgeGrade,
}

impl JudgeVerdict {
    pub fn score(&self) -> f64 {
        match self.grade {
            JudgeGrade::Bad => 0.0,
            JudgeGrade::Okay => 0.25,
            JudgeGrade::Good => 0.5,
        }
    }
}

/// Which reading of the partial-match condition to apply.
///
/// `Strict` pays only when the overlap is strictly between zero and the
/// truth size, so a strict superset of the truth earns nothing. `Literal`
/// pays any overlapping non-exact prediction, so a strict superset earns
/// the full fraction (0.1 + 0.9 = 1.0). `Strict` is the default; `Literal`
/// exists for ablation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PartialRewardMode {
    #[default]
    Strict,
    Literal,
}

/// All five component scores plus the total for one completion.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RewardBreakdown {
    pub correctness: f64,
    pub partial: f64,
    pub format: f64,
    pub validity: f64,
    pub judge: f64,
    pub total: f64,
}

impl RewardBreakdown {
    fn from_components(
        correctness: f64,
        partial: f64,
        format: f64,
        validity: f64,
        judge: f64,
    ) -> RewardBreakdown {
        RewardBreakdown {
            correctness,
            partial,
            format,
            validity,
            judge,
            total: correctness + partial + format + validity + judge,
        }
    }
}

/// +2.0 iff the predicted set equals the truth set exactly.
pub fn correctness_reward(pred: &LabelSet, truth: &LabelSet) -> f64 {
    if pred == truth {
        2.0
    } else {
        0.0
    }
}

/// Scaled reward for partially correct predictions, strict mode.
pub fn partial_match_reward(pred: &LabelSet, truth: &LabelSet) -> f64 {
    partial_match_reward_with_mode(pred, truth, PartialRewardMode::Strict)
}

/// Scaled reward for partially correct predictions.
///
/// Pays 0.1 + 0.9 * |pred ∩ truth| / |truth| when the mode's overlap
/// condition holds, 0.0 otherwise. An exact match never earns a partial
/// reward in either mode; that case belongs to the correctness component.
pub fn partial_match_reward_with_mode(
    pred: &LabelSet,
    truth: &LabelSet,
    mode: PartialRewardMode,
) -> f64 {
    let overlap = pred.intersection(truth).len();
    let pays = match mode {
        PartialRewardMode::Strict => overlap > 0 && overlap < truth.len(),
        PartialRewardMode::Literal => overlap > 0 && pred != truth,
    };
    if pays {
        0.1 + 0.9 * overlap as f64 / truth.len() as f64
    } else {
        0.0
    }
}

/// +0.25 iff the tags are well-formed and at least one valid code appears
/// after the closing tag.
pub fn format_reward(parsed: &ParsedCompletion) -> f64 {
    if parsed.wellformed_tags && !parsed.predicted.is_empty() {
        0.25
    } else {
        0.0
    }
}

/// -0.25 per distinct invalid code-like token in the tail.
pub fn validity_reward(parsed: &ParsedCompletion) -> f64 {
    -0.25 * parsed.invalid_tokens.len() as f64
}

/// Reasoning-quality score from the judge client.
///
/// Absent or empty reasoning scores 0.0 without consulting the judge.
/// A judge failure after its retry budget also scores 0.0, with a logged
/// warning; a transient gateway outage must not abort a long run.
pub fn judge_reward(reasoning_text: Option<&str>, narrative: &str, judge: &dyn JudgeClient) -> f64 {
    let reasoning = match reasoning_text {
        Some(text) if !text.trim().is_empty() => text,
        _ => return 0.0,
    };
    match judge.evaluate(reasoning, narrative) {
        Ok(verdict) => verdict.score(),
        Err(err) => {
            warn!("judge unavailable, recording 0.0: {err}");
            0.0
        }
    }
}

/// Parses the completion once and computes all five components on the
/// shared parse.
pub fn total_reward(
    raw_completion: &str,
    truth: &LabelSet,
    narrative: &str,
    judge: &dyn JudgeClient,
) -> RewardBreakdown {
    total_reward_with_mode(
        raw_completion,
        truth,
        narrative,
        judge,
        PartialRewardMode::Strict,
    )
}

pub fn total_reward_with_mode(
    raw_completion: &str,
    truth: &LabelSet,
    narrative: &str,
    judge: &dyn JudgeClient,
    mode: PartialRewardMode,
) -> RewardBreakdown {
    let parsed = parse_completion(raw_completion);
    let correctness = correctness_reward(&parsed.predicted, truth);
    let partial = partial_match_reward_with_mode(&parsed.predicted, truth, mode);
    let format = format_reward(&parsed);
    let validity = validity_reward(&parsed);
    let judge_score = judge_reward(parsed.reasoning_text.as_deref(), narrative, judge);
    RewardBreakdown::from_components(correctness, partial, format, validity, judge_score)
}

/// Judge client plus reward settings, bundled for the training loop.
pub struct RewardEngine {
    judge: Box<dyn JudgeClient>,
    partial_mode: PartialRewardMode,
}

impl RewardEngine {
    pub fn new(judge: Box<dyn JudgeClient>, partial_mode: PartialRewardMode) -> RewardEngine {
        RewardEngine {
            judge,
            partial_mode,
        }
    }

    pub fn score(&self, raw_completion: &str, truth: &LabelSet, narrative: &str) -> RewardBreakdown {
        total_reward_with_mode(
            raw_completion,
            truth,
            narrative,
            self.judge.as_ref(),
            self.partial_mode,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::stub::FixedJudge;
    use crate::gateway::GatewayError;
    use crate::taxonomy::HfacsCode::*;
    use proptest::prelude::*;

    struct UnavailableJudge;
    impl JudgeClient for UnavailableJudge {
        fn evaluate(&self, _: &str, _: &str) -> Result<JudgeVerdict, GatewayError> {
            Err(GatewayError::JudgeUnavailable { attempts: 4 })
        }
    }

    fn set(codes: &[crate::taxonomy::HfacsCode]) -> LabelSet {
        codes.iter().copied().collect()
    }

    #[test]
    fn correctness_exact_match_only() {
        assert_eq!(correctness_reward(&set(&[Ae100, Pe100]), &set(&[Ae100, Pe100])), 2.0);
        assert_eq!(correctness_reward(&LabelSet::EMPTY, &set(&[Ae100])), 0.0);
        // Supersets are not exact matches.
        assert_eq!(
            correctness_reward(&set(&[Ae100, Pe100, Pc100]), &set(&[Ae100, Pe100])),
            0.0
        );
    }

    #[test]
    fn partial_reward_fraction() {
        let r = partial_match_reward(&set(&[Ae100]), &set(&[Ae100, Pe100, Pc100]));
        assert!((r - 0.4).abs() < 1e-12, "got {r}");
    }

    #[test]
    fn partial_reward_zero_on_disjoint_and_full_overlap() {
        assert_eq!(partial_match_reward(&set(&[Pt100]), &set(&[Ae100])), 0.0);
        assert_eq!(
            partial_match_reward(&set(&[Ae100, Pe100]), &set(&[Ae100, Pe100])),
            0.0
        );
        // Full intersection via superset: strict mode pays nothing.
        assert_eq!(
            partial_match_reward(&set(&[Ae100, Pe100, Pc100]), &set(&[Ae100, Pe100])),
            0.0
        );
    }

    #[test]
    fn partial_reward_literal_mode_pays_supersets() {
        let r = partial_match_reward_with_mode(
            &set(&[Ae100, Pe100, Pc100]),
            &set(&[Ae100, Pe100]),
            PartialRewardMode::Literal,
        );
        assert!((r - 1.0).abs() < 1e-12);
        // Exact match still pays nothing in literal mode.
        assert_eq!(
            partial_match_reward_with_mode(
                &set(&[Ae100]),
                &set(&[Ae100]),
                PartialRewardMode::Literal
            ),
            0.0
        );
    }

    #[test]
    fn format_reward_cases() {
        let good = parse_completion("<reasoning>r</reasoning> AE100");
        assert_eq!(format_reward(&good), 0.25);
        let no_tags = parse_completion("AE100");
        assert_eq!(format_reward(&no_tags), 0.0);
        let no_code = parse_completion("<reasoning>r</reasoning> QQ111");
        assert_eq!(format_reward(&no_code), 0.0);
    }

    #[test]
    fn validity_counts_distinct_tokens() {
        let parsed = parse_completion("<reasoning>r</reasoning> ZZ123 QQ999 AE100");
        assert_eq!(validity_reward(&parsed), -0.5);
        let repeated = parse_completion("<reasoning>r</reasoning> ZZ123 ZZ123 ZZ123");
        assert_eq!(validity_reward(&repeated), -0.25);
        let clean = parse_completion("<reasoning>r</reasoning> AE100");
        assert_eq!(validity_reward(&clean), 0.0);
    }

    #[test]
    fn judge_reward_grades_and_degradation() {
        let narrative = "the pilot stalled on final";
        assert_eq!(judge_reward(None, narrative, &FixedJudge::new(JudgeGrade::Good)), 0.0);
        assert_eq!(
            judge_reward(Some(""), narrative, &FixedJudge::new(JudgeGrade::Good)),
            0.0
        );
        assert_eq!(
            judge_reward(Some("clear analysis"), narrative, &FixedJudge::new(JudgeGrade::Good)),
            0.5
        );
        assert_eq!(
            judge_reward(Some("clear analysis"), narrative, &FixedJudge::new(JudgeGrade::Okay)),
            0.25
        );
        assert_eq!(
            judge_reward(Some("clear analysis"), narrative, &UnavailableJudge),
            0.0
        );
    }

    #[test]
    fn total_reward_maximum_case() {
        let judge = FixedJudge::new(JudgeGrade::Good);
        let breakdown = total_reward(
            "<reasoning>the pilot misjudged the flare badly</reasoning> AE100 PE100",
            &set(&[Ae100, Pe100]),
            "narrative",
            &judge,
        );
        assert_eq!(breakdown.correctness, 2.0);
        assert_eq!(breakdown.partial, 0.0);
        assert_eq!(breakdown.format, 0.25);
        assert_eq!(breakdown.validity, 0.0);
        assert_eq!(breakdown.judge, 0.5);
        assert_eq!(breakdown.total, 2.75);
    }

    #[test]
    fn total_reward_empty_completion_is_all_zero() {
        let judge = FixedJudge::new(JudgeGrade::Good);
        let breakdown = total_reward("", &set(&[Ae100]), "narrative", &judge);
        assert_eq!(breakdown.total, 0.0);
        assert_eq!(breakdown.correctness, 0.0);
        assert_eq!(breakdown.partial, 0.0);
        assert_eq!(breakdown.format, 0.0);
        assert_eq!(breakdown.validity, 0.0);
        assert_eq!(breakdown.judge, 0.0);
    }

    #[test]
    fn total_reward_mixed_case() {
        // One of two truth codes, tags well-formed, one invalid token, judge Okay:
        // 0 + (0.1 + 0.45) + 0.25 - 0.25 + 0.25 = 0.80
        let judge = FixedJudge::new(JudgeGrade::Okay);
        let breakdown = total_reward(
            "<reasoning>weather was a factor here</reasoning> AE100 ZZ123",
            &set(&[Ae100, Pe100]),
            "narrative",
            &judge,
        );
        assert!((breakdown.partial - 0.55).abs() < 1e-12);
        assert_eq!(breakdown.correctness, 0.0);
        assert_eq!(breakdown.format, 0.25);
        assert_eq!(breakdown.validity, -0.25);
        assert_eq!(breakdown.judge, 0.25);
        assert!((breakdown.total - 0.80).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn correctness_and_partial_mutually_exclusive(
            pred_bits in 0u16..(1 << 10),
            truth_bits in 1u16..(1 << 10),
        ) {
            let pred: LabelSet = crate::taxonomy::all_codes()
                .into_iter()
                .filter(|c| pred_bits & (1 << c.index()) != 0)
                .collect();
            let truth: LabelSet = crate::taxonomy::all_codes()
                .into_iter()
                .filter(|c| truth_bits & (1 << c.index()) != 0)
                .collect();
            for mode in [PartialRewardMode::Strict, PartialRewardMode::Literal] {
                let c = correctness_reward(&pred, &truth);
                let p = partial_match_reward_with_mode(&pred, &truth, mode);
                prop_assert!(!(c > 0.0 && p > 0.0));
                if c == 2.0 {
                    prop_assert_eq!(p, 0.0);
                }
            }
        }

        #[test]
        fn partial_monotone_in_overlap(truth_bits in 0u16..(1 << 10)) {
            let truth: LabelSet = crate::taxonomy::all_codes()
                .into_iter()
                .filter(|c| truth_bits & (1 << c.index()) != 0)
                .collect();
            prop_assume!(truth.len() >= 3);
            let codes: Vec<_> = truth.iter().collect();
            // Growing a strict-partial prediction by one more correct code
            // never lowers the reward.
            for k in 1..truth.len() - 1 {
                let smaller: LabelSet = codes[..k].iter().copied().collect();
                let larger: LabelSet = codes[..k + 1].iter().copied().collect();
                prop_assert!(
                    partial_match_reward(&larger, &truth)
                        >= partial_match_reward(&smaller, &truth)
                );
            }
        }
    }
}
