//! Vector sequence acceleration.
//!
//! Slowly converging partial sums `s_0, s_1, ...` are extrapolated with the
//! epsilon recursion
//!
//! ```text
//! e_m^(-1) = 0,   e_m^(0) = s_m,
//! e_m^(c)  = e_{m+1}^(c-2) + mult(c) * inv(e_{m+1}^(c-1) - e_m^(c-1))
//! ```
//!
//! where `inv` is the Samelson vector inverse `a / (a . a)`. With
//! `mult(c) = floor(c/2) + 1` this is Sablonniere's modification of Wynn's
//! epsilon algorithm; with `mult(c) = 1` it is plain Wynn (the Shanks
//! transformation). Odd columns are auxiliary; the accelerated estimates live
//! in the even columns, and from `2N + 1` input sums the order-`N` result is
//! `e_0^(2N)`.
//!
//! Two evaluation strategies are provided: [`epsilon_table_naive`] keeps the
//! whole triangular table, while [`epsilon_accelerate`] sweeps anti-diagonals
//! and deletes entries as soon as their last consumer has been computed,
//! holding at most `2N + 2` vectors at a time. Both perform the exact same
//! per-entry arithmetic in the same order, so their outputs are bitwise
//! identical.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Differences smaller than this (relative to the entry magnitude) are
/// treated as converged rather than inverted.
pub const DEGENERATE_REL_TOL: f64 = 1e-13;

/// Samelson vector inverse `v / (v . v)`.
///
/// An involution: applying it twice returns the input. Near-zero input means
/// two consecutive iterates coincided; callers should treat the sequence as
/// converged instead of dividing.
pub fn samelson_inverse(v: &Vector) -> Result<Vector> {
    let nsq = v.dot(v);
    if !nsq.is_normal() {
        // zero, subnormal, infinite or NaN squared norm
        return Err(Error::DegenerateDifference);
    }
    Ok(v.scaled(1.0 / nsq))
}

#[derive(Debug, Clone, Copy)]
enum Multiplier {
    Sablonniere,
    PlainWynn,
}

impl Multiplier {
    fn factor(self, column: usize) -> f64 {
        match self {
            Multiplier::Sablonniere => (column / 2 + 1) as f64,
            Multiplier::PlainWynn => 1.0,
        }
    }
}

/// Outcome of one entry of the recursion: either a fresh entry or an early
/// convergence verdict carrying the entry to report.
enum EntryOutcome {
    Value(Vector),
    Converged(Vector),
}

/// `e_m^(c)` from its three parents. `prev_lo = e_m^(c-1)`,
/// `prev_hi = e_{m+1}^(c-1)`, `back = e_{m+1}^(c-2)`.
fn compute_entry(
    prev_lo: &Vector,
    prev_hi: &Vector,
    back: &Vector,
    column: usize,
    mult: Multiplier,
) -> EntryOutcome {
    let diff = prev_hi.sub(prev_lo);
    let scale = prev_lo.norm2().max(1.0);
    if diff.norm2() < DEGENERATE_REL_TOL * scale {
        // Two consecutive entries of column c-1 coincide: that column has
        // converged. Report the nearest even-column entry.
        let converged = if column % 2 == 1 {
            prev_lo.clone()
        } else {
            back.clone()
        };
        return EntryOutcome::Converged(converged);
    }
    let inv = diff.scaled(1.0 / diff.dot(&diff));
    let mut entry = back.clone();
    entry.axpy(mult.factor(column), &inv);
    EntryOutcome::Value(entry)
}

fn check_window(sums: &[Vector], order: usize) -> Result<()> {
    let expected = 2 * order + 1;
    if sums.len() != expected {
        return Err(Error::Dimension {
            context: "epsilon acceleration window",
            expected,
            got: sums.len(),
        });
    }
    let dim = sums[0].len();
    if sums.iter().any(|s| s.len() != dim) {
        return Err(Error::Dimension {
            context: "epsilon acceleration window entries",
            expected: dim,
            got: sums.iter().map(|s| s.len()).find(|&l| l != dim).unwrap_or(dim),
        });
    }
    Ok(())
}

/// Order-`N` acceleration keeping the full triangular table.
///
/// Entries are computed along anti-diagonals `m + c = 1, 2, ..., 2N` (the
/// same order as the streaming form) and the result is `e_0^(2N)`.
pub fn epsilon_table_naive(sums: &[Vector], order: usize) -> Result<Vector> {
    run_table(sums, order, Multiplier::Sablonniere)
}

/// Plain Wynn epsilon algorithm (Shanks transformation), multiplier fixed
/// to 1.
pub fn plain_wynn(sums: &[Vector], order: usize) -> Result<Vector> {
    run_table(sums, order, Multiplier::PlainWynn)
}

fn run_table(sums: &[Vector], order: usize, mult: Multiplier) -> Result<Vector> {
    check_window(sums, order)?;
    if order == 0 {
        return Ok(sums[0].clone());
    }
    let span = 2 * order;
    let dim = sums[0].len();
    let zero = Vector::zeros(dim);

    // table[m][c] with c >= 0; column -1 is implicitly zero.
    let mut table: Vec<Vec<Option<Vector>>> = (0..=span)
        .map(|m| {
            let mut row = vec![None; span - m + 1];
            row[0] = Some(sums[m].clone());
            row
        })
        .collect();

    for diag in 1..=span {
        for c in 1..=diag {
            let m = diag - c;
            let back = if c == 1 {
                &zero
            } else {
                table[m + 1][c - 2].as_ref().expect("parent entry present")
            };
            let prev_lo = table[m][c - 1].as_ref().expect("parent entry present");
            let prev_hi = table[m + 1][c - 1].as_ref().expect("parent entry present");
            match compute_entry(prev_lo, prev_hi, back, c, mult) {
                EntryOutcome::Value(v) => table[m][c] = Some(v),
                EntryOutcome::Converged(v) => return Ok(v),
            }
        }
    }
    Ok(table[0][span].take().expect("final entry present"))
}

/// Streaming order-`N` acceleration. Output is bitwise identical to
/// [`epsilon_table_naive`]; storage is bounded by `2N + 2` live vectors.
pub fn epsilon_accelerate(sums: &[Vector], order: usize) -> Result<Vector> {
    run_streaming(sums, order, Multiplier::Sablonniere).map(|(v, _)| v)
}

/// As [`epsilon_accelerate`], additionally reporting the peak number of
/// vectors held in the table at any point.
pub fn epsilon_accelerate_instrumented(sums: &[Vector], order: usize) -> Result<(Vector, usize)> {
    run_streaming(sums, order, Multiplier::Sablonniere)
}

fn run_streaming(
    sums: &[Vector],
    order: usize,
    mult: Multiplier,
) -> Result<(Vector, usize)> {
    check_window(sums, order)?;
    if order == 0 {
        return Ok((sums[0].clone(), 1));
    }
    let span = 2 * order;
    let dim = sums[0].len();
    let zero = Vector::zeros(dim);

    let mut store: HashMap<(usize, usize), Vector> = HashMap::new();
    for (m, s) in sums.iter().enumerate() {
        store.insert((m, 0), s.clone());
    }
    let mut peak = store.len();

    // Anti-diagonal sweeps; after computing e_m^(c) its parent e_{m+1}^(c-2)
    // has no remaining consumers and is dropped. The end-of-sweep drop
    // releases e_0^(c-2) for the sweep's final column.
    for diag in 1..=span {
        for c in 1..=diag {
            let m = diag - c;
            let entry = {
                let back = if c == 1 {
                    &zero
                } else {
                    store.get(&(m + 1, c - 2)).expect("parent entry present")
                };
                let prev_lo = store.get(&(m, c - 1)).expect("parent entry present");
                let prev_hi = store.get(&(m + 1, c - 1)).expect("parent entry present");
                compute_entry(prev_lo, prev_hi, back, c, mult)
            };
            let value = match entry {
                EntryOutcome::Value(v) => v,
                EntryOutcome::Converged(v) => return Ok((v, peak)),
            };
            if c >= 2 {
                store.remove(&(m + 1, c - 2));
            }
            store.insert((m, c), value);
            peak = peak.max(store.len());
        }
        // The sweep's lowest-m parent column entry has no consumers left.
        store.remove(&(0, diag - 1));
    }

    let result = store.remove(&(0, span)).expect("final entry present");
    Ok((result, peak))
}
