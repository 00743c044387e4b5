//! Cross-seed aggregation of run summaries: bootstrap medians with standard
//! errors, mirroring how multi-seed results are usually reported.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sfn_core::rng::SplitMix64;

use crate::error::{io_err, HarnessError, Result};
use crate::experiment::median;
use crate::logging::read_summary;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Median and its bootstrap standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MedianEstimate {
    pub median: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Bootstrap estimate of the median: the point estimate is the sample
/// median; the standard error is the standard deviation of medians over
/// seeded resamples.
pub fn bootstrap_median(values: &[f64], resamples: usize, seed: u64) -> MedianEstimate {
    let n = values.len();
    let point = median(values);
    if n < 2 {
        return MedianEstimate {
            median: point,
            std_error: 0.0,
            n,
        };
    }
    let mut rng = SplitMix64::new(seed);
    let mut resampled = Vec::with_capacity(resamples);
    let mut scratch = vec![0.0; n];
    for _ in 0..resamples {
        for slot in scratch.iter_mut() {
            *slot = values[rng.next_index(n)];
        }
        resampled.push(median(&scratch));
    }
    let mean = resampled.iter().sum::<f64>() / resamples as f64;
    let var = resampled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / resamples as f64;
    MedianEstimate {
        median: point,
        std_error: var.sqrt(),
        n,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: Vec<PathBuf>,
    pub final_train: MedianEstimate,
    pub final_val: MedianEstimate,
    pub final_test: MedianEstimate,
    pub min_train: MedianEstimate,
    pub min_test: MedianEstimate,
}

/// Reads `summary.json` from each run directory and aggregates the final
/// and minimum losses across seeds.
pub fn aggregate_runs(dirs: &[PathBuf], seed: u64) -> Result<AggregateReport> {
    if dirs.is_empty() {
        return Err(HarnessError::Config("aggregate needs at least one run".into()));
    }
    let summaries = dirs
        .iter()
        .map(|d| read_summary(&d.join("summary.json")))
        .collect::<Result<Vec<_>>>()?;

    let collect = |f: fn(&crate::logging::Summary) -> f64| -> Vec<f64> {
        summaries.iter().map(f).collect()
    };
    let estimate = |values: Vec<f64>, salt: u64| {
        bootstrap_median(&values, BOOTSTRAP_RESAMPLES, seed.wrapping_add(salt))
    };

    Ok(AggregateReport {
        runs: dirs.to_vec(),
        final_train: estimate(collect(|s| s.final_losses.train), 1),
        final_val: estimate(collect(|s| s.final_losses.val), 2),
        final_test: estimate(collect(|s| s.final_losses.test), 3),
        min_train: estimate(collect(|s| s.min.train), 4),
        min_test: estimate(collect(|s| s.min.test), 5),
    })
}

pub fn write_aggregate(path: &Path, report: &AggregateReport) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report)?).map_err(io_err(path))
}
