//! The closed 10-code, two-layer HFACS 8.0 subset and label-set handling.
//!
//! The taxonomy covers unsafe acts (AE100, AE200, AD000) and their
//! preconditions (PC100-PC300, PE100-PE200, PP100, PT100). The set is fixed
//! at compile time; everything downstream (parsing, rewards, metrics,
//! prompts) iterates it in one canonical order.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Which of the two HFACS layers a code belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    UnsafeAct,
    Precondition,
}

/// One of the ten HFACS codes in scope.
///
/// Variants are declared in canonical order: unsafe acts first, then
/// preconditions. `all_codes()` and `LabelSet` iteration follow this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum HfacsCode {
    Ae100 = 0,
    Ae200 = 1,
    Ad000 = 2,
    Pc100 = 3,
    Pc200 = 4,
    Pc300 = 5,
    Pe100 = 6,
    Pe200 = 7,
    Pp100 = 8,
    Pt100 = 9,
}

pub const CODE_COUNT: usize = 10;

const ALL: [HfacsCode; CODE_COUNT] = [
    HfacsCode::Ae100,
    HfacsCode::Ae200,
    HfacsCode::Ad000,
    HfacsCode::Pc100,
    HfacsCode::Pc200,
    HfacsCode::Pc300,
    HfacsCode::Pe100,
    HfacsCode::Pe200,
    HfacsCode::Pp100,
    HfacsCode::Pt100,
];

impl HfacsCode {
    /// The canonical uppercase identifier, e.g. `"AE100"`.
    pub fn as_str(self) -> &'static str {
        match self {
            HfacsCode::Ae100 => "AE100",
            HfacsCode::Ae200 => "AE200",
            HfacsCode::Ad000 => "AD000",
            HfacsCode::Pc100 => "PC100",
            HfacsCode::Pc200 => "PC200",
            HfacsCode::Pc300 => "PC300",
            HfacsCode::Pe100 => "PE100",
            HfacsCode::Pe200 => "PE200",
            HfacsCode::Pp100 => "PP100",
            HfacsCode::Pt100 => "PT100",
        }
    }

    /// Human-readable category name used in prompts and reports.
    pub fn display_name(self) -> &'static str {
        match self {
            HfacsCode::Ae100 => "Performance/Skill-Based Errors",
            HfacsCode::Ae200 => "Judgment/Decision-Making Errors",
            HfacsCode::Ad000 => "Known Deviations",
            HfacsCode::Pc100 => "Pilot Mental Conditions",
            HfacsCode::Pc200 => "Pilot Physiological Conditions",
            HfacsCode::Pc300 => "Pilot Sensory/Physical Limitations",
            HfacsCode::Pe100 => "Physical Environment",
            HfacsCode::Pe200 => "Technological Environment",
            HfacsCode::Pp100 => "Planning Conditions",
            HfacsCode::Pt100 => "Training Conditions",
        }
    }

    /// Short definition embedded in classification and generation prompts.
    pub fn definition(self) -> &'static str {
        match self {
            HfacsCode::Ae100 => {
                "errors in basic flying skill or aircraft handling, such as a botched flare, \
                 loss of directional control, or improper stick-and-rudder technique"
            }
            HfacsCode::Ae200 => {
                "faulty judgment or decision-making, such as electing to continue flight into \
                 deteriorating conditions or selecting an unsuitable landing area"
            }
            HfacsCode::Ad000 => {
                "knowing departures from rules, procedures, or limitations, such as intentional \
                 low-level flight or operating outside the aircraft envelope"
            }
            HfacsCode::Pc100 => {
                "adverse mental states of the pilot, such as distraction, complacency, stress, \
                 or loss of situational awareness"
            }
            HfacsCode::Pc200 => {
                "adverse physiological states of the pilot, such as fatigue, hypoxia, illness, \
                 or impairment by alcohol, drugs, or medication"
            }
            HfacsCode::Pc300 => {
                "physical or sensory limitations of the pilot, such as visual illusions, \
                 spatial disorientation, or insufficient reaction time"
            }
            HfacsCode::Pe100 => {
                "physical environmental factors, such as weather, wind, visibility, icing, \
                 terrain, or lighting"
            }
            HfacsCode::Pe200 => {
                "technological environment factors, such as instrument or automation design, \
                 display shortcomings, or equipment layout"
            }
            HfacsCode::Pp100 => {
                "deficient preflight planning or mission preparation, such as inadequate fuel \
                 planning, weather briefing, or weight-and-balance computation"
            }
            HfacsCode::Pt100 => {
                "inadequate training or lack of instruction for the flight conditions or \
                 equipment involved"
            }
        }
    }

    /// Layer membership: the first three codes are unsafe acts, the rest
    /// preconditions.
    pub fn layer(self) -> Layer {
        match self {
            HfacsCode::Ae100 | HfacsCode::Ae200 | HfacsCode::Ad000 => Layer::UnsafeAct,
            _ => Layer::Precondition,
        }
    }

    /// Position in canonical order, 0..10.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Parses an exact, case-sensitive code token.
    pub fn from_token(token: &str) -> Option<HfacsCode> {
        ALL.iter().copied().find(|c| c.as_str() == token)
    }
}

impl fmt::Display for HfacsCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for HfacsCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for HfacsCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        HfacsCode::from_token(&s)
            .ok_or_else(|| D::Error::custom(format!("unknown HFACS code {s:?}")))
    }
}

/// All ten codes in canonical order: unsafe acts first, then preconditions.
pub fn all_codes() -> [HfacsCode; CODE_COUNT] {
    ALL
}

/// True iff `token` exactly equals one of the ten codes (case-sensitive,
/// no surrounding whitespace).
pub fn is_valid_code(token: &str) -> bool {
    HfacsCode::from_token(token).is_some()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("invalid HFACS label token {token:?}")]
    InvalidLabel { token: String },
}

/// An unordered, duplicate-free set of HFACS codes.
///
/// Backed by a 10-bit mask in canonical code order, so equality, hashing and
/// iteration order are independent of insertion order. May be empty for
/// predictions; ground-truth label sets are validated non-empty at load time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct LabelSet {
    bits: u16,
}

impl LabelSet {
    pub const EMPTY: LabelSet = LabelSet { bits: 0 };

    pub fn new() -> LabelSet {
        LabelSet::EMPTY
    }

    pub fn insert(&mut self, code: HfacsCode) {
        self.bits |= 1 << code.index();
    }

    pub fn contains(&self, code: HfacsCode) -> bool {
        self.bits & (1 << code.index()) != 0
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn intersection(&self, other: &LabelSet) -> LabelSet {
        LabelSet {
            bits: self.bits & other.bits,
        }
    }

    pub fn union(&self, other: &LabelSet) -> LabelSet {
        LabelSet {
            bits: self.bits | other.bits,
        }
    }

    /// Codes present in the set, in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = HfacsCode> + '_ {
        ALL.iter().copied().filter(move |c| self.contains(*c))
    }

    /// Canonical serialized form: codes joined by single spaces, in
    /// canonical order. Empty set serializes to the empty string.
    pub fn to_label_string(&self) -> String {
        let mut out = String::new();
        for code in self.iter() {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(code.as_str());
        }
        out
    }
}

impl FromIterator<HfacsCode> for LabelSet {
    fn from_iter<T: IntoIterator<Item = HfacsCode>>(iter: T) -> Self {
        let mut set = LabelSet::new();
        for code in iter {
            set.insert(code);
        }
        set
    }
}

impl Serialize for LabelSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_label_string())
    }
}

impl<'de> Deserialize<'de> for LabelSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_label_string(&s).map_err(D::Error::custom)
    }
}

/// Parses a whitespace-separated string of codes into a set.
///
/// Duplicates collapse. Any token that is not a valid code is an error:
/// ground-truth label strings must be fully valid.
pub fn parse_label_string(s: &str) -> Result<LabelSet, TaxonomyError> {
    let mut set = LabelSet::new();
    for token in s.split_whitespace() {
        match HfacsCode::from_token(token) {
            Some(code) => set.insert(code),
            None => {
                return Err(TaxonomyError::InvalidLabel {
                    token: token.to_string(),
                })
            }
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exactly_ten_codes_in_fixed_order() {
        let codes = all_codes();
        assert_eq!(codes.len(), 10);
        assert_eq!(codes[0].as_str(), "AE100");
        assert_eq!(codes[9].as_str(), "PT100");
        let strs: Vec<&str> = codes.iter().map(|c| c.as_str()).collect();
        assert_eq!(
            strs,
            [
                "AE100", "AE200", "AD000", "PC100", "PC200", "PC300", "PE100", "PE200", "PP100",
                "PT100"
            ]
        );
    }

    #[test]
    fn layer_assignment() {
        for code in all_codes() {
            let expected = match code.as_str() {
                "AE100" | "AE200" | "AD000" => Layer::UnsafeAct,
                _ => Layer::Precondition,
            };
            assert_eq!(code.layer(), expected, "{code}");
        }
    }

    #[test]
    fn is_valid_code_exact_match_only() {
        assert!(is_valid_code("AE100"));
        assert!(!is_valid_code("ae100"));
        assert!(!is_valid_code("AE300"));
        assert!(!is_valid_code(" AE100"));
        assert!(!is_valid_code("AE100 "));
        assert!(!is_valid_code(""));
    }

    #[test]
    fn is_valid_code_accepts_exactly_ten_strings() {
        // Scan the full code-like shape space; only the ten taxonomy strings pass.
        let mut accepted = 0;
        for a in b'A'..=b'Z' {
            for b in b'A'..=b'Z' {
                for n in 0..1000u32 {
                    let token = format!("{}{}{:03}", a as char, b as char, n);
                    if is_valid_code(&token) {
                        accepted += 1;
                    }
                }
            }
        }
        assert_eq!(accepted, 10);
    }

    #[test]
    fn parse_label_string_basic() {
        let set = parse_label_string("AE100 PE100").unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.contains(HfacsCode::Ae100));
        assert!(set.contains(HfacsCode::Pe100));
    }

    #[test]
    fn parse_label_string_dedupes() {
        let set = parse_label_string("AE100 AE100").unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn parse_label_string_rejects_unknown_token() {
        let err = parse_label_string("AE100 XX999").unwrap_err();
        assert_eq!(
            err,
            TaxonomyError::InvalidLabel {
                token: "XX999".to_string()
            }
        );
    }

    #[test]
    fn label_set_order_independent() {
        let a: LabelSet = [HfacsCode::Pe100, HfacsCode::Ae100].into_iter().collect();
        let b: LabelSet = [HfacsCode::Ae100, HfacsCode::Pe100].into_iter().collect();
        assert_eq!(a, b);
        assert_eq!(a.to_label_string(), "AE100 PE100");
    }

    #[test]
    fn round_trip_all_subsets() {
        // The taxonomy is small enough to enumerate every subset.
        for bits in 0u16..(1 << 10) {
            let set = LabelSet { bits };
            let parsed = parse_label_string(&set.to_label_string()).unwrap();
            assert_eq!(parsed, set);
        }
    }

    proptest! {
        #[test]
        fn insertion_order_never_matters(perm in proptest::sample::subsequence(all_codes().to_vec(), 0..=10)) {
            let forward: LabelSet = perm.iter().copied().collect();
            let backward: LabelSet = perm.iter().rev().copied().collect();
            prop_assert_eq!(forward, backward);
        }
    }
}
