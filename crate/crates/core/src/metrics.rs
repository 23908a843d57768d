//! Multi-label evaluation: exact/partial match accuracy plus macro and
//! micro precision/recall/F1 over (prediction, truth) pairs.
//!
//! All ratios use the 0/0 -> 0 convention, which never inflates a score.
//! Macro averages run over all ten taxonomy codes in canonical order by
//! default; averaging only over codes that actually occur is available as
//! a switch.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{all_codes, HfacsCode, LabelSet, CODE_COUNT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no (prediction, truth) pairs to evaluate")]
    EmptyInput,
}

/// Raw counts for one code.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Counts plus derived scores for one code, as reported.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodeScore {
    pub code: HfacsCode,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Which codes participate in the macro average.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MacroMode {
    /// All ten taxonomy codes, whether or not they occur in the data.
    #[default]
    AllCodes,
    /// Only codes with at least one TP, FP or FN.
    PresentOnly,
}

/// Full evaluation over one suite of pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub exact_match: f64,
    pub partial_match: f64,
    pub per_code: Vec<CodeScore>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Fraction of pairs whose predicted set equals the truth set.
pub fn exact_match_accuracy(pairs: &[(LabelSet, LabelSet)]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let hits = pairs.iter().filter(|(pred, truth)| pred == truth).count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Fraction of pairs sharing at least one code with the truth.
pub fn partial_match_accuracy(pairs: &[(LabelSet, LabelSet)]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let hits = pairs
        .iter()
        .filter(|(pred, truth)| !pred.intersection(truth).is_empty())
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Per-code TP/FP/FN over the whole suite, in canonical code order.
pub fn per_code_counts(
    pairs: &[(LabelSet, LabelSet)],
) -> Result<[Counts; CODE_COUNT], MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut counts = [Counts::default(); CODE_COUNT];
    for (pred, truth) in pairs {
        for code in all_codes() {
            let c = &mut counts[code.index()];
            match (pred.contains(code), truth.contains(code)) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(counts)
}

/// Unweighted mean of per-code precision/recall/F1.
pub fn macro_scores(counts: &[Counts; CODE_COUNT]) -> (f64, f64, f64) {
    macro_scores_with_mode(counts, MacroMode::AllCodes)
}

pub fn macro_scores_with_mode(counts: &[Counts; CODE_COUNT], mode: MacroMode) -> (f64, f64, f64) {
    let included: Vec<&Counts> = match mode {
        MacroMode::AllCodes => counts.iter().collect(),
        MacroMode::PresentOnly => counts
            .iter()
            .filter(|c| c.tp + c.fp + c.fn_ > 0)
            .collect(),
    };
    if included.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let n = included.len() as f64;
    let mut p_sum = 0.0;
    let mut r_sum = 0.0;
    let mut f_sum = 0.0;
    for c in included {
        let p = ratio(c.tp, c.tp + c.fp);
        let r = ratio(c.tp, c.tp + c.fn_);
        p_sum += p;
        r_sum += r;
        f_sum += f1_of(p, r);
    }
    (p_sum / n, r_sum / n, f_sum / n)
}

/// Precision/recall/F1 from counts pooled across all codes.
pub fn micro_scores(counts: &[Counts; CODE_COUNT]) -> (f64, f64, f64) {
    let tp: u64 = counts.iter().map(|c| c.tp).sum();
    let fp: u64 = counts.iter().map(|c| c.fp).sum();
    let fn_: u64 = counts.iter().map(|c| c.fn_).sum();
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    (p, r, f1_of(p, r))
}

/// Computes the full report with the default all-codes macro average.
pub fn evaluate(pairs: &[(LabelSet, LabelSet)]) -> Result<EvalReport, MetricsError> {
    evaluate_with_mode(pairs, MacroMode::AllCodes)
}

pub fn evaluate_with_mode(
    pairs: &[(LabelSet, LabelSet)],
    mode: MacroMode,
) -> Result<EvalReport, MetricsError> {
    let counts = per_code_counts(pairs)?;
    let (macro_precision, macro_recall, macro_f1) = macro_scores_with_mode(&counts, mode);
    let (micro_precision, micro_recall, micro_f1) = micro_scores(&counts);
    let per_code = all_codes()
        .into_iter()
        .map(|code| {
            let c = counts[code.index()];
            let precision = ratio(c.tp, c.tp + c.fp);
            let recall = ratio(c.tp, c.tp + c.fn_);
            CodeScore {
                code,
                tp: c.tp,
                fp: c.fp,
                fn_: c.fn_,
                precision,
                recall,
                f1: f1_of(precision, recall),
            }
        })
        .collect();
    Ok(EvalReport {
        n_samples: pairs.len(),
        exact_match: exact_match_accuracy(pairs)?,
        partial_match: partial_match_accuracy(pairs)?,
        per_code,
        macro_precision,
        macro_recall,
        macro_f1,
        micro_precision,
        micro_recall,
        micro_f1,
    })
}
