//! Per-sample JSONL telemetry and the reward-curve export.
//!
//! One record per (step, completion). Every record carries the run's
//! config digest and the schema version; totals are re-validated on read
//! and mismatching or unparseable lines are skipped with a count.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::grpo::trainer::StepReport;

pub const TELEMETRY_SCHEMA_VERSION: u32 = 1;

/// One completion's training log entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub schema: u32,
    pub config_digest: String,
    pub step: u64,
    pub ev_id: String,
    pub prompt_digest: String,
    pub completion_index: usize,
    pub raw_completion: String,
    pub parsed_codes: String,
    pub correctness: f64,
    pub partial: f64,
    pub format: f64,
    pub validity: f64,
    pub judge: f64,
    pub total: f64,
    pub advantage: f64,
    pub objective: f64,
    pub learning_rate: f64,
    /// Milliseconds since the run started. Written as 0 in deterministic
    /// mode so identically seeded stub runs produce bit-identical logs.
    pub wall_clock_ms: f64,
}

/// Streaming JSONL writer; flushes at least every 10 steps.
pub struct TelemetryWriter {
    out: BufWriter<File>,
    config_digest: String,
    deterministic_timing: bool,
    started: Instant,
    steps_since_flush: u32,
}

const FLUSH_EVERY_STEPS: u32 = 10;

impl TelemetryWriter {
    pub fn create(
        path: &Path,
        config_digest: &str,
        deterministic_timing: bool,
    ) -> io::Result<TelemetryWriter> {
        Ok(TelemetryWriter {
            out: BufWriter::new(File::create(path)?),
            config_digest: config_digest.to_string(),
            deterministic_timing,
            started: Instant::now(),
            steps_since_flush: 0,
        })
    }

    /// Opens an existing log for appending (resume).
    pub fn append(
        path: &Path,
        config_digest: &str,
        deterministic_timing: bool,
    ) -> io::Result<TelemetryWriter> {
        Ok(TelemetryWriter {
            out: BufWriter::new(File::options().append(true).open(path)?),
            config_digest: config_digest.to_string(),
            deterministic_timing,
            started: Instant::now(),
            steps_since_flush: 0,
        })
    }

    pub fn write_step(&mut self, report: &StepReport) -> io::Result<()> {
        let wall_clock_ms = if self.deterministic_timing {
            0.0
        } else {
            self.started.elapsed().as_secs_f64() * 1e3
        };
        for (i, completion) in report.completions.iter().enumerate() {
            let record = TelemetryRecord {
                schema: TELEMETRY_SCHEMA_VERSION,
                config_digest: self.config_digest.clone(),
                step: report.step,
                ev_id: report.ev_id.clone(),
                prompt_digest: report.prompt_digest.clone(),
                completion_index: i,
                raw_completion: completion.raw.clone(),
                parsed_codes: completion.parsed_codes.clone(),
                correctness: completion.reward.correctness,
                partial: completion.reward.partial,
                format: completion.reward.format,
                validity: completion.reward.validity,
                judge: completion.reward.judge,
                total: completion.reward.total,
                advantage: completion.advantage,
                objective: report.objective,
                learning_rate: report.learning_rate,
                wall_clock_ms,
            };
            serde_json::to_writer(&mut self.out, &record)?;
            self.out.write_all(b"\n")?;
        }
        self.steps_since_flush += 1;
        if self.steps_since_flush >= FLUSH_EVERY_STEPS {
            self.flush()?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.steps_since_flush = 0;
        self.out.flush()
    }
}

/// Result of reading a telemetry file.
#[derive(Debug)]
pub struct TelemetryRead {
    pub records: Vec<TelemetryRecord>,
    /// Unparseable lines plus records whose total failed revalidation.
    pub skipped: usize,
}

/// Reads a telemetry file, skipping corrupt lines. A record is corrupt if
/// it fails to parse or its total does not equal its component sum.
pub fn read_telemetry(path: &Path) -> io::Result<TelemetryRead> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TelemetryRecord>(&line) {
            Ok(record) => {
                let sum = record.correctness
                    + record.partial
                    + record.format
                    + record.validity
                    + record.judge;
                if (record.total - sum).abs() > 1e-9 {
                    skipped += 1;
                } else {
                    records.push(record);
                }
            }
            Err(_) => skipped += 1,
        }
    }
    Ok(TelemetryRead { records, skipped })
}

/// Rewrites a telemetry file keeping only records with `step <=
/// max_step`; used when resuming from a checkpoint earlier than the last
/// logged step.
pub fn truncate_telemetry(path: &Path, max_step: u64) -> io::Result<usize> {
    let read = read_telemetry(path)?;
    let kept: Vec<&TelemetryRecord> =
        read.records.iter().filter(|r| r.step <= max_step).collect();
    let mut out = BufWriter::new(File::create(path)?);
    for record in &kept {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(kept.len())
}

/// Per-step mean of the reward components, as exported to the curve file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: u64,
    pub mean_total: f64,
    pub mean_correctness: f64,
    pub mean_partial: f64,
    pub mean_format: f64,
    pub mean_validity: f64,
    pub mean_judge: f64,
}

impl CurveRow {
    pub fn from_report(report: &StepReport) -> CurveRow {
        let n = report.completions.len().max(1) as f64;
        let mut row = CurveRow {
            step: report.step,
            mean_total: 0.0,
            mean_correctness: 0.0,
            mean_partial: 0.0,
            mean_format: 0.0,
            mean_validity: 0.0,
            mean_judge: 0.0,
        };
        for c in &report.completions {
            row.mean_total += c.reward.total;
            row.mean_correctness += c.reward.correctness;
            row.mean_partial += c.reward.partial;
            row.mean_format += c.reward.format;
            row.mean_validity += c.reward.validity;
            row.mean_judge += c.reward.judge;
        }
        row.mean_total /= n;
        row.mean_correctness /= n;
        row.mean_partial /= n;
        row.mean_format /= n;
        row.mean_validity /= n;
        row.mean_judge /= n;
        row
    }
}

/// Writes the reward curve as comma-delimited text with the config digest
/// in a leading comment line.
pub fn write_reward_curve(path: &Path, rows: &[CurveRow], config_digest: &str) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# config_digest={config_digest}")?;
    writeln!(
        out,
        "step,mean_total,mean_correctness,mean_partial,mean_format,mean_validity,mean_judge"
    )?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.step,
            row.mean_total,
            row.mean_correctness,
            row.mean_partial,
            row.mean_format,
            row.mean_validity,
            row.mean_judge
        )?;
    }
    out.flush()
}
