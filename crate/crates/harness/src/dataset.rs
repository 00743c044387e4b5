//! CSV ingestion, deterministic splits, and feature standardisation.

use std::path::Path;

use sfn_core::linalg::DenseMatrix;
use sfn_core::model::{Batch, LossKind, Targets};
use sfn_core::rng::SplitMix64;

use crate::error::{io_err, HarnessError, Result};

/// One split of a dataset, features and raw target columns.
#[derive(Debug, Clone)]
pub struct Split {
    pub inputs: DenseMatrix,
    pub targets: DenseMatrix,
}

impl Split {
    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Builds a model batch; targets become class indices for
    /// cross-entropy losses.
    pub fn batch(&self, loss: LossKind) -> Batch {
        self.batch_of_rows(&(0..self.len()).collect::<Vec<_>>(), loss)
    }

    /// As [`Self::batch`], restricted to the given row indices.
    pub fn batch_of_rows(&self, rows: &[usize], loss: LossKind) -> Batch {
        let inputs = DenseMatrix::from_rows(rows.iter().map(|&r| self.inputs.row(r).to_vec()).collect());
        let targets = match loss {
            LossKind::Mse => Targets::Values(DenseMatrix::from_rows(
                rows.iter().map(|&r| self.targets.row(r).to_vec()).collect(),
            )),
            LossKind::SoftmaxCrossEntropy => Targets::Classes(
                rows.iter()
                    .map(|&r| self.targets[(r, 0)].round().max(0.0) as usize)
                    .collect(),
            ),
        };
        Batch { inputs, targets }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Split,
    pub val: Split,
    pub test: Split,
}

impl Dataset {
    pub fn feature_width(&self) -> usize {
        self.train.inputs.cols()
    }

    pub fn target_width(&self) -> usize {
        self.train.targets.cols()
    }
}

/// Parses numeric CSV text. A single header line is tolerated (detected by a
/// non-numeric first field) and skipped. Errors carry 1-based row/column
/// positions.
pub fn parse_numeric_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut width = None;
    for (line_idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        let mut failed_at = None;
        for (col_idx, field) in trimmed.split(',').enumerate() {
            match field.trim().parse::<f64>() {
                Ok(x) => row.push(x),
                Err(e) => {
                    failed_at = Some((col_idx, e.to_string()));
                    break;
                }
            }
        }
        if let Some((col_idx, message)) = failed_at {
            // a failing first row is treated as a header
            if rows.is_empty() && line_idx == 0 {
                continue;
            }
            return Err(HarnessError::CsvParse {
                row: line_idx + 1,
                column: col_idx + 1,
                message,
            });
        }
        if let Some(w) = width {
            if row.len() != w {
                return Err(HarnessError::CsvParse {
                    row: line_idx + 1,
                    column: row.len(),
                    message: format!("expected {w} fields"),
                });
            }
        } else {
            width = Some(row.len());
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(HarnessError::Dataset("no data rows".into()));
    }
    Ok(rows)
}

/// Seeded shuffle, three-way split, and optional per-feature standardisation
/// with training-set statistics only. The last `target_cols` columns are the
/// targets.
pub fn split_rows(
    mut rows: Vec<Vec<f64>>,
    fractions: [f64; 3],
    standardise: bool,
    target_cols: usize,
    seed: u64,
) -> Result<Dataset> {
    let n = rows.len();
    let width = rows[0].len();
    if target_cols == 0 || target_cols >= width {
        return Err(HarnessError::Dataset(format!(
            "target_cols must be in 1..{width}, got {target_cols}"
        )));
    }

    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut rows);

    let n_train = (fractions[0] * n as f64).round() as usize;
    let n_val = (fractions[1] * n as f64).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(HarnessError::Dataset(format!(
            "split {fractions:?} of {n} rows leaves an empty split"
        )));
    }
    let n_feat = width - target_cols;

    let make_split = |range: std::ops::Range<usize>| {
        let inputs = DenseMatrix::from_rows(
            rows[range.clone()]
                .iter()
                .map(|r| r[..n_feat].to_vec())
                .collect(),
        );
        let targets =
            DenseMatrix::from_rows(rows[range].iter().map(|r| r[n_feat..].to_vec()).collect());
        Split { inputs, targets }
    };

    let mut train = make_split(0..n_train);
    let mut val = make_split(n_train..n_train + n_val);
    let mut test = make_split(n_train + n_val..n);

    if standardise {
        let stats = feature_stats(&train.inputs);
        for split in [&mut train, &mut val, &mut test] {
            apply_standardisation(&mut split.inputs, &stats);
        }
    }

    Ok(Dataset { train, val, test })
}

pub fn load_csv_dataset(
    path: &Path,
    fractions: [f64; 3],
    standardise: bool,
    target_cols: usize,
    seed: u64,
) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let rows = parse_numeric_csv(&text)?;
    split_rows(rows, fractions, standardise, target_cols, seed)
}

/// Per-column mean and standard deviation.
pub fn feature_stats(m: &DenseMatrix) -> Vec<(f64, f64)> {
    let n = m.rows() as f64;
    (0..m.cols())
        .map(|j| {
            let mean = (0..m.rows()).map(|i| m[(i, j)]).sum::<f64>() / n;
            let var = (0..m.rows())
                .map(|i| (m[(i, j)] - mean).powi(2))
                .sum::<f64>()
                / n;
            (mean, var.sqrt().max(1e-12))
        })
        .collect()
}

fn apply_standardisation(m: &mut DenseMatrix, stats: &[(f64, f64)]) {
    for i in 0..m.rows() {
        for (j, &(mean, std)) in stats.iter().enumerate() {
            m[(i, j)] = (m[(i, j)] - mean) / std;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten_row_csv() -> String {
        (0..10)
            .map(|i| format!("{},{},{}", i, i * 2, i * 3))
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn split_sizes_match_fractions() {
        let rows = parse_numeric_csv(&ten_row_csv()).unwrap();
        let ds = split_rows(rows, [0.8, 0.1, 0.1], false, 1, 0).unwrap();
        assert_eq!(ds.train.len(), 8);
        assert_eq!(ds.val.len(), 1);
        assert_eq!(ds.test.len(), 1);
        assert_eq!(ds.feature_width(), 2);
        assert_eq!(ds.target_width(), 1);
    }

    #[test]
    fn same_seed_same_split() {
        let rows = parse_numeric_csv(&ten_row_csv()).unwrap();
        let a = split_rows(rows.clone(), [0.8, 0.1, 0.1], false, 1, 5).unwrap();
        let b = split_rows(rows, [0.8, 0.1, 0.1], false, 1, 5).unwrap();
        assert_eq!(a.train.inputs.as_slice(), b.train.inputs.as_slice());
        assert_eq!(a.test.targets.as_slice(), b.test.targets.as_slice());
    }

    #[test]
    fn standardised_train_features_are_centred() {
        let mut rng = SplitMix64::new(3);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                vec![
                    5.0 + 2.0 * rng.next_normal(),
                    -3.0 + 0.5 * rng.next_normal(),
                    rng.next_normal(),
                ]
            })
            .collect();
        let ds = split_rows(rows, [0.8, 0.1, 0.1], true, 1, 0).unwrap();
        for (mean, std) in feature_stats(&ds.train.inputs) {
            assert!(mean.abs() < 1e-9, "column mean {mean}");
            assert!((std - 1.0).abs() < 1e-9, "column std {std}");
        }
    }

    #[test]
    fn header_line_tolerated() {
        let text = format!("x1,x2,y\n{}", ten_row_csv());
        let rows = parse_numeric_csv(&text).unwrap();
        assert_eq!(rows.len(), 10);
    }

    #[test]
    fn parse_error_carries_position() {
        let text = "1,2,3\n4,oops,6\n";
        match parse_numeric_csv(text) {
            Err(HarnessError::CsvParse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, 2);
            }
            other => panic!("expected CsvParse error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let text = "1,2,3\n4,5\n";
        assert!(parse_numeric_csv(text).is_err());
    }

    #[test]
    fn empty_split_rejected() {
        let rows = parse_numeric_csv(&ten_row_csv()).unwrap();
        assert!(split_rows(rows, [0.99, 0.005, 0.005], false, 1, 0).is_err());
    }

    #[test]
    fn class_targets_from_batch() {
        let split = Split {
            inputs: DenseMatrix::from_rows(vec![vec![0.1], vec![0.2]]),
            targets: DenseMatrix::from_rows(vec![vec![2.0], vec![0.0]]),
        };
        match split.batch(LossKind::SoftmaxCrossEntropy).targets {
            Targets::Classes(c) => assert_eq!(c, vec![2, 0]),
            _ => panic!("expected class targets"),
        }
    }
}
