//! Completion parsing: reasoning tags, predicted codes, invalid code-like
//! tokens.
//!
//! Completions are expected to look like
//! `<reasoning>…</reasoning> CODE CODE …`. Predictions are read from the
//! text after the first well-formed closing tag. Malformed input never
//! errors; it degrades to scanning the whole output so correctness and
//! partial rewards can still score it (the format reward separately
//! yields zero in that case).

use std::collections::BTreeSet;

use crate::taxonomy::{HfacsCode, LabelSet};

pub const OPEN_TAG: &str = "<reasoning>";
pub const CLOSE_TAG: &str = "</reasoning>";

/// Structured decomposition of one raw completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedCompletion {
    pub raw: String,
    /// Content of the first well-formed `<reasoning>…</reasoning>` pair,
    /// absent when the tags are missing or out of order.
    pub reasoning_text: Option<String>,
    /// Everything after the first closing tag, or the whole input when no
    /// well-formed pair exists.
    pub tail: String,
    /// Distinct valid codes found among the tail's whitespace tokens.
    pub predicted: LabelSet,
    /// Distinct tail tokens shaped like a code (two uppercase letters +
    /// three digits) that are not in the taxonomy.
    pub invalid_tokens: BTreeSet<String>,
    pub wellformed_tags: bool,
}

/// True iff `token` has the surface shape of an HFACS code: exactly two
/// ASCII uppercase letters followed by exactly three ASCII digits.
pub fn is_code_like(token: &str) -> bool {
    let bytes = token.as_bytes();
    bytes.len() == 5
        && bytes[..2].iter().all(u8::is_ascii_uppercase)
        && bytes[2..].iter().all(u8::is_ascii_digit)
}

/// Decomposes a raw completion.
///
/// Only the first well-formed tag pair defines the reasoning block; any
/// later tags are ordinary tail text. Without a well-formed pair the whole
/// input is treated as tail.
pub fn parse_completion(raw: &str) -> ParsedCompletion {
    let pair = raw.find(OPEN_TAG).and_then(|open| {
        let content_start = open + OPEN_TAG.len();
        raw[content_start..]
            .find(CLOSE_TAG)
            .map(|rel| (content_start, content_start + rel))
    });

    let (reasoning_text, tail, wellformed_tags) = match pair {
        Some((content_start, close)) => (
            Some(raw[content_start..close].to_string()),
            raw[close + CLOSE_TAG.len()..].to_string(),
            true,
        ),
        None => (None, raw.to_string(), false),
    };

    let mut predicted = LabelSet::new();
    let mut invalid_tokens = BTreeSet::new();
    for token in tail.split_whitespace() {
        if let Some(code) = HfacsCode::from_token(token) {
            predicted.insert(code);
        } else if is_code_like(token) {
            invalid_tokens.insert(token.to_string());
        }
    }

    ParsedCompletion {
        raw: raw.to_string(),
        reasoning_text,
        tail,
        predicted,
        invalid_tokens,
        wellformed_tags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{is_valid_code, HfacsCode};
    use proptest::prelude::*;

    #[test]
    fn canonical_wellformed_completion() {
        let parsed =
            parse_completion("<reasoning>pilot misjudged approach</reasoning> AE200 PC100");
        assert!(parsed.wellformed_tags);
        assert_eq!(parsed.reasoning_text.as_deref(), Some("pilot misjudged approach"));
        assert_eq!(
            parsed.predicted,
            [HfacsCode::Ae200, HfacsCode::Pc100].into_iter().collect()
        );
        assert!(parsed.invalid_tokens.is_empty());
    }

    #[test]
    fn missing_tags_scans_whole_output() {
        let parsed = parse_completion("AE100 PE100");
        assert!(!parsed.wellformed_tags);
        assert_eq!(parsed.reasoning_text, None);
        assert_eq!(parsed.tail, "AE100 PE100");
        assert_eq!(
            parsed.predicted,
            [HfacsCode::Ae100, HfacsCode::Pe100].into_iter().collect()
        );
    }

    #[test]
    fn invalid_code_like_tokens_counted_once() {
        let parsed = parse_completion("<reasoning>x</reasoning> AE100 ZZ123 ZZ123");
        assert_eq!(parsed.predicted, [HfacsCode::Ae100].into_iter().collect());
        assert_eq!(parsed.invalid_tokens.len(), 1);
        assert!(parsed.invalid_tokens.contains("ZZ123"));
    }

    #[test]
    fn only_first_pair_defines_reasoning() {
        let parsed = parse_completion(
            "<reasoning>first</reasoning> AE100 <reasoning>second</reasoning> PE100",
        );
        assert_eq!(parsed.reasoning_text.as_deref(), Some("first"));
        // Codes in the tail after the first pair all count, including those
        // around the second (inert) tag pair.
        assert_eq!(
            parsed.predicted,
            [HfacsCode::Ae100, HfacsCode::Pe100].into_iter().collect()
        );
    }

    #[test]
    fn close_tag_before_open_tag_is_malformed() {
        let parsed = parse_completion("</reasoning> AE100 <reasoning>trailing");
        assert!(!parsed.wellformed_tags);
        assert_eq!(parsed.tail, "</reasoning> AE100 <reasoning>trailing");
        assert_eq!(parsed.predicted, [HfacsCode::Ae100].into_iter().collect());
    }

    #[test]
    fn open_tag_without_close_is_malformed() {
        let parsed = parse_completion("<reasoning>pilot got lost AE100");
        assert!(!parsed.wellformed_tags);
        assert_eq!(parsed.reasoning_text, None);
        assert_eq!(parsed.predicted, [HfacsCode::Ae100].into_iter().collect());
    }

    #[test]
    fn codes_inside_reasoning_do_not_count() {
        let parsed = parse_completion("<reasoning>maybe AE100 or PE100</reasoning> PC300");
        assert_eq!(parsed.predicted, [HfacsCode::Pc300].into_iter().collect());
    }

    #[test]
    fn empty_input() {
        let parsed = parse_completion("");
        assert!(!parsed.wellformed_tags);
        assert!(parsed.predicted.is_empty());
        assert!(parsed.invalid_tokens.is_empty());
        assert_eq!(parsed.tail, "");
    }

    #[test]
    fn code_like_shape_boundaries() {
        assert!(is_code_like("ZZ123"));
        assert!(is_code_like("QQ999"));
        assert!(!is_code_like("ZZZ12"));
        assert!(!is_code_like("Z1234"));
        assert!(!is_code_like("zz123"));
        assert!(!is_code_like("ZZ12"));
        assert!(!is_code_like("ZZ1234"));
        assert!(!is_code_like("AE10O"));
    }

    proptest! {
        #[test]
        fn determinism_and_token_partition(raw in ".{0,200}") {
            let a = parse_completion(&raw);
            let b = parse_completion(&raw);
            prop_assert_eq!(&a, &b);
            for code in a.predicted.iter() {
                prop_assert!(is_valid_code(code.as_str()));
            }
            for token in &a.invalid_tokens {
                prop_assert!(!is_valid_code(token));
                prop_assert!(is_code_like(token));
            }
        }

        #[test]
        fn extra_whitespace_between_tail_tokens_is_irrelevant(
            tokens in proptest::collection::vec("(AE100|PE100|ZZ123|word|QQ999)", 0..8),
            seps in proptest::collection::vec("[ \t\n]{1,3}", 0..8),
        ) {
            let single = format!("<reasoning>r</reasoning> {}", tokens.join(" "));
            let mut padded = String::from("<reasoning>r</reasoning> ");
            for (i, tok) in tokens.iter().enumerate() {
                padded.push_str(tok);
                let sep = seps.get(i).map(String::as_str).unwrap_or("  ");
                padded.push_str(sep);
            }
            let a = parse_completion(&single);
            let b = parse_completion(&padded);
            prop_assert_eq!(a.predicted, b.predicted);
            prop_assert_eq!(a.invalid_tokens, b.invalid_tokens);
        }
    }
}
