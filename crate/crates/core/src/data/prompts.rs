//! Prompt construction: the classification chat prompt and the few-shot
//! synthetic-generation prompt. Both are deterministic functions of their
//! inputs; telemetry records a digest of the rendered text.

use crate::data::{AccidentRecord, DataError};
use crate::parsing::{CLOSE_TAG, OPEN_TAG};
use crate::taxonomy::{all_codes, HfacsCode};

pub const MAX_FEWSHOT_EXEMPLARS: usize = 10;

/// System + user message pair for one classification request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
}

impl PromptBundle {
    /// Single rendered form used for digests and logging.
    pub fn rendered(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }

    pub fn digest(&self) -> String {
        crate::artifact::sha256_hex(self.rendered().as_bytes())[..16].to_string()
    }
}

/// Builds the classification prompt: the system text enumerates the ten
/// codes with definitions and the output format rules; the user text
/// carries the narrative.
pub fn build_chat_prompt(narrative: &str) -> PromptBundle {
    let mut system = String::from(
        "You are an aviation-safety analyst. Classify the human factors in the accident \
         narrative using these categories:\n",
    );
    for code in all_codes() {
        system.push_str(&format!(
            "- {} ({}): {}\n",
            code.as_str(),
            code.display_name(),
            code.definition()
        ));
    }
    system.push_str(&format!(
        "\nFirst reason about the narrative inside {OPEN_TAG} and {CLOSE_TAG} tags. \
         After the closing tag, output the applicable category codes as a single \
         space-separated line. Output only codes from the list above."
    ));
    PromptBundle {
        system,
        user: format!("Analyze this accident narrative: {narrative}"),
    }
}

/// Builds the few-shot generation prompt for one deficit code from up to
/// ten real exemplar narratives of that class.
pub fn build_fewshot_prompt(
    code: HfacsCode,
    exemplars: &[&AccidentRecord],
) -> Result<String, DataError> {
    if exemplars.is_empty() {
        return Err(DataError::NoExemplars { code });
    }
    let shown = &exemplars[..exemplars.len().min(MAX_FEWSHOT_EXEMPLARS)];
    let mut prompt = format!(
        "You write realistic general-aviation accident narratives for safety-analysis \
         research.\n\nTarget category: {} ({}).\nDefinition: {}.\n\n\
         Real narratives exhibiting this factor:\n",
        code.as_str(),
        code.display_name(),
        code.definition()
    );
    for (i, record) in shown.iter().enumerate() {
        prompt.push_str(&format!("{}. {}\n", i + 1, record.narrative));
    }
    prompt.push_str(&format!(
        "\nWrite one new, original narrative in the same style that clearly exhibits {}. \
         Respond with the narrative text only.",
        code.as_str()
    ));
    Ok(prompt)
}
