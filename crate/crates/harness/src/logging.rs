//! Structured run logs: one CSV record per optimisation step plus a JSON
//! summary. Floats are written in Rust's shortest round-trip form, so
//! `parse(write(records)) == records` exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, HarnessError, Result};

pub const CSV_HEADER: &str = "step,wall_ms,train_loss,val_loss,test_loss,V,lambda,eta,mu,flags";

/// One optimisation step as logged.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub wall_ms: u64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub test_loss: f64,
    pub v: f64,
    pub lambda: f64,
    pub eta: f64,
    pub mu: f64,
    pub flags: Vec<String>,
}

impl StepRecord {
    fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.step,
            self.wall_ms,
            self.train_loss,
            self.val_loss,
            self.test_loss,
            self.v,
            self.lambda,
            self.eta,
            self.mu,
            self.flags.join(";")
        )
    }
}

pub fn records_to_csv(records: &[StepRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn parse_records(text: &str) -> Result<Vec<StepRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        other => {
            return Err(HarnessError::LogParse {
                line: 1,
                message: format!("bad header: {:?}", other.map(|(_, l)| l)),
            })
        }
    }
    let mut records = Vec::new();
    let mut last_step = 0usize;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(HarnessError::LogParse {
                line: idx + 1,
                message: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        let parse_err = |message: String| HarnessError::LogParse {
            line: idx + 1,
            message,
        };
        let record = StepRecord {
            step: fields[0].parse().map_err(|e| parse_err(format!("step: {e}")))?,
            wall_ms: fields[1]
                .parse()
                .map_err(|e| parse_err(format!("wall_ms: {e}")))?,
            train_loss: parse_f64(fields[2]).map_err(parse_err)?,
            val_loss: parse_f64(fields[3]).map_err(parse_err)?,
            test_loss: parse_f64(fields[4]).map_err(parse_err)?,
            v: parse_f64(fields[5]).map_err(parse_err)?,
            lambda: parse_f64(fields[6]).map_err(parse_err)?,
            eta: parse_f64(fields[7]).map_err(parse_err)?,
            mu: parse_f64(fields[8]).map_err(parse_err)?,
            flags: if fields[9].is_empty() {
                Vec::new()
            } else {
                fields[9].split(';').map(str::to_string).collect()
            },
        };
        if record.step <= last_step && !records.is_empty() {
            return Err(HarnessError::LogParse {
                line: idx + 1,
                message: format!("step {} does not increase", record.step),
            });
        }
        last_step = record.step;
        records.push(record);
    }
    Ok(records)
}

fn parse_f64(field: &str) -> std::result::Result<f64, String> {
    field.parse::<f64>().map_err(|e| format!("{field}: {e}"))
}

pub fn write_records(path: &Path, records: &[StepRecord]) -> Result<()> {
    std::fs::write(path, records_to_csv(records)).map_err(io_err(path))
}

pub fn read_records(path: &Path) -> Result<Vec<StepRecord>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_records(&text)
}

/// Per-step series diagnostics as logged for series-based optimisers:
/// scaling factor, truncation length, acceleration order, fallback flag and
/// every term norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesLogRecord {
    pub step: usize,
    pub v: f64,
    pub terms: usize,
    pub accel_order: usize,
    pub accel_fallback: bool,
    pub term_norms: Vec<f64>,
}

pub const SERIES_CSV_HEADER: &str = "step,V,K,N,fallback,term_norms";

pub fn series_records_to_csv(records: &[SeriesLogRecord]) -> String {
    let mut out = String::from(SERIES_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step,
            r.v,
            r.terms,
            r.accel_order,
            r.accel_fallback,
            r.term_norms
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(";")
        ));
    }
    out
}

pub fn parse_series_records(text: &str) -> Result<Vec<SeriesLogRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == SERIES_CSV_HEADER => {}
        other => {
            return Err(HarnessError::LogParse {
                line: 1,
                message: format!("bad series log header: {:?}", other.map(|(_, l)| l)),
            })
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(HarnessError::LogParse {
                line: idx + 1,
                message: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let parse_err = |message: String| HarnessError::LogParse {
            line: idx + 1,
            message,
        };
        records.push(SeriesLogRecord {
            step: fields[0].parse().map_err(|e| parse_err(format!("step: {e}")))?,
            v: parse_f64(fields[1]).map_err(parse_err)?,
            terms: fields[2].parse().map_err(|e| parse_err(format!("K: {e}")))?,
            accel_order: fields[3].parse().map_err(|e| parse_err(format!("N: {e}")))?,
            accel_fallback: fields[4]
                .parse()
                .map_err(|e| parse_err(format!("fallback: {e}")))?,
            term_norms: if fields[5].is_empty() {
                Vec::new()
            } else {
                fields[5]
                    .split(';')
                    .map(|x| parse_f64(x).map_err(&parse_err))
                    .collect::<Result<_>>()?
            },
        });
    }
    Ok(records)
}

pub fn write_series_records(path: &Path, records: &[SeriesLogRecord]) -> Result<()> {
    std::fs::write(path, series_records_to_csv(records)).map_err(io_err(path))
}

/// Train/validation/test losses at a single point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct LossTriple {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

/// Final run summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub steps: usize,
    pub wall_ms: u64,
    pub initial: LossTriple,
    #[serde(rename = "final")]
    pub final_losses: LossTriple,
    pub min: LossTriple,
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}
