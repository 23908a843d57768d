//! Synthetic keyword-separable datasets for desk-scale runs.
//!
//! Each code owns one distinguishing keyword; a record's narrative contains
//! exactly the keyword of its label. The keywords (and the surrounding
//! template words) occupy distinct bins under the 64-bin feature hash, so
//! the classification task is linearly separable for the toy policy while
//! still flowing through the full prompt/parse/reward machinery.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::AccidentRecord;
use crate::seeding;
use crate::taxonomy::{HfacsCode, LabelSet};

/// One keyword per code, in canonical code order.
pub const TOY_KEYWORDS: [(HfacsCode, &str); 10] = [
    (HfacsCode::Ae100, "mishandled"),
    (HfacsCode::Ae200, "misjudged"),
    (HfacsCode::Ad000, "deviation"),
    (HfacsCode::Pc100, "distracted"),
    (HfacsCode::Pc200, "fatigued"),
    (HfacsCode::Pc300, "disoriented"),
    (HfacsCode::Pe100, "crosswind"),
    (HfacsCode::Pe200, "glare"),
    (HfacsCode::Pp100, "unplanned"),
    (HfacsCode::Pt100, "untrained"),
];

/// The keyword map as stubs and reports consume it.
pub fn toy_keyword_map() -> BTreeMap<HfacsCode, String> {
    TOY_KEYWORDS
        .iter()
        .map(|(code, kw)| (*code, kw.to_string()))
        .collect()
}

pub fn keyword_for(code: HfacsCode) -> &'static str {
    TOY_KEYWORDS[code.index()].1
}

const PHASES: [&str; 6] = ["landing", "takeoff", "climb", "cruise", "descent", "taxi"];
const PLACES: [&str; 6] = ["runway", "field", "airport", "valley", "lake", "ridge"];

fn toy_narrative(code: HfacsCode, rng: &mut ChaCha8Rng) -> String {
    let phase = PHASES[rng.gen_range(0..PHASES.len())];
    let place = PLACES[rng.gen_range(0..PLACES.len())];
    format!(
        "the pilot {} during {} near the {}",
        keyword_for(code),
        phase,
        place
    )
}

const TOY_TAG: u64 = 0x746f79;

/// Generates a balanced single-label train/test pair: `train_per_code`
/// training records and `test_per_code` held-out records for each code.
pub fn generate_toy_dataset(
    seed: u64,
    train_per_code: usize,
    test_per_code: usize,
) -> (Vec<AccidentRecord>, Vec<AccidentRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(seed, &[TOY_TAG]));
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (code, _) in TOY_KEYWORDS {
        let labels: LabelSet = [code].into_iter().collect();
        for k in 1..=train_per_code {
            train.push(AccidentRecord::new(
                format!("TOY-{code}-{k}"),
                toy_narrative(code, &mut rng),
                labels,
            ));
        }
        for k in 1..=test_per_code {
            test.push(AccidentRecord::new(
                format!("TOYTEST-{code}-{k}"),
                toy_narrative(code, &mut rng),
                labels,
            ));
        }
    }
    (train, test)
}

/// Generates a deliberately imbalanced single-label dataset with the given
/// per-code record counts; exercises the split + balance pipeline.
pub fn generate_imbalanced_dataset(seed: u64, counts: &[(HfacsCode, usize)]) -> Vec<AccidentRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(seed, &[TOY_TAG, 1]));
    let mut records = Vec::new();
    for &(code, count) in counts {
        let labels: LabelSet = [code].into_iter().collect();
        for k in 1..=count {
            records.push(AccidentRecord::new(
                format!("GA-{code}-{k}"),
                toy_narrative(code, &mut rng),
                labels,
            ));
        }
    }
    records
}
