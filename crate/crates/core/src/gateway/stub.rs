//! Deterministic offline gateway clients.
//!
//! Stubs grade and generate by transparent rules of their inputs only, so
//! two identical pipeline runs produce identical gateway outputs.

use std::collections::BTreeMap;

use crate::gateway::{GatewayError, GeneratorClient, JudgeClient};
use crate::rewards::{JudgeGrade, JudgeVerdict};
use crate::taxonomy::{all_codes, HfacsCode};

/// Minimum reasoning length (trimmed characters) before the rule-based
/// judge considers the text substantive.
pub const STUB_JUDGE_MIN_LEN: usize = 20;

/// Judge that always returns one configured grade.
#[derive(Debug, Clone, Copy)]
pub struct FixedJudge {
    grade: JudgeGrade,
}

impl FixedJudge {
    pub fn new(grade: JudgeGrade) -> FixedJudge {
        FixedJudge { grade }
    }
}

impl JudgeClient for FixedJudge {
    fn evaluate(&self, _reasoning: &str, _narrative: &str) -> Result<JudgeVerdict, GatewayError> {
        Ok(JudgeVerdict { grade: self.grade })
    }
}

/// Rule-based judge grading by reasoning length and keyword relevance.
///
/// Good: trimmed reasoning is at least [`STUB_JUDGE_MIN_LEN`] characters
/// and mentions at least one rule keyword that also appears in the
/// narrative. Okay: long enough but no relevant keyword. Bad: otherwise.
#[derive(Debug, Clone)]
pub struct StubJudge {
    keywords: BTreeMap<HfacsCode, String>,
}

/// Builds the deterministic rule-based judge from a code -> keyword map.
pub fn judge_stub(rules: BTreeMap<HfacsCode, String>) -> StubJudge {
    StubJudge { keywords: rules }
}

impl JudgeClient for StubJudge {
    fn evaluate(&self, reasoning_text: &str, narrative: &str) -> Result<JudgeVerdict, GatewayError> {
        let reasoning = reasoning_text.trim();
        if reasoning.chars().count() < STUB_JUDGE_MIN_LEN {
            return Ok(JudgeVerdict {
                grade: JudgeGrade::Bad,
            });
        }
        let relevant = self
            .keywords
            .values()
            .any(|kw| narrative.contains(kw.as_str()) && reasoning.contains(kw.as_str()));
        Ok(JudgeVerdict {
            grade: if relevant {
                JudgeGrade::Good
            } else {
                JudgeGrade::Okay
            },
        })
    }
}

/// Generator returning a canned narrative for the first taxonomy code
/// mentioned in the prompt.
///
/// The narrative embeds that code's keyword so downstream keyword-based
/// tooling (the rule judge, toy featurization) still works on synthetic
/// rows.
#[derive(Debug, Clone)]
pub struct StubGenerator {
    keywords: BTreeMap<HfacsCode, String>,
}

impl StubGenerator {
    pub fn new(keywords: BTreeMap<HfacsCode, String>) -> StubGenerator {
        StubGenerator { keywords }
    }
}

impl GeneratorClient for StubGenerator {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        let target = all_codes()
            .into_iter()
            .find(|code| prompt.contains(code.as_str()));
        let narrative = match target {
            Some(code) => {
                let keyword = self
                    .keywords
                    .get(&code)
                    .map(String::as_str)
                    .unwrap_or("unspecified");
                format!(
                    "During a local flight the pilot {keyword} and the airplane was \
                     substantially damaged in the accident sequence."
                )
            }
            None => String::from(
                "During a local flight an accident occurred and the airplane was \
                 substantially damaged.",
            ),
        };
        Ok(narrative)
    }
}
