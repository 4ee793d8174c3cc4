use super::{Partition, TransitionMatrix};
use crate::error::{Error, Result};

/// Tolerance for lumpability and balance residuals.
pub const LUMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpabilityVerdict {
    pub ordinary: bool,
    pub exact: bool,
    /// Largest disagreement of block transition mass between two states of
    /// the same block.
    pub ordinary_residual: f64,
    /// Largest deviation of `π` from its block representative.
    pub exact_residual: f64,
}

/// Block sums `Σ_{y ∈ C_j} Q(x, y)` of one row, sorted by block.
fn block_row(q: &TransitionMatrix, partition: &Partition, x: usize) -> Vec<(usize, f64)> {
    let mut row: Vec<(usize, f64)> = q.row(x).map(|(y, p)| (partition.label(y), p)).collect();
    row.sort_unstable_by_key(|&(j, _)| j);
    row.dedup_by(|next, kept| {
        if next.0 == kept.0 {
            kept.1 += next.1;
            true
        } else {
            false
        }
    });
    row
}

fn max_diff(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    use std::cmp::Ordering;
    let (mut i, mut k) = (0, 0);
    let mut worst: f64 = 0.0;
    loop {
        let d = match (a.get(i), b.get(k)) {
            (Some(&(ja, pa)), Some(&(jb, pb))) => match ja.cmp(&jb) {
                Ordering::Equal => {
                    i += 1;
                    k += 1;
                    pa - pb
                }
                Ordering::Less => {
                    i += 1;
                    pa
                }
                Ordering::Greater => {
                    k += 1;
                    pb
                }
            },
            (Some(&(_, pa)), None) => {
                i += 1;
                pa
            }
            (None, Some(&(_, pb))) => {
                k += 1;
                pb
            }
            (None, None) => break,
        };
        worst = worst.max(d.abs());
    }
    worst
}

fn check_dims(q: &TransitionMatrix, partition: &Partition) -> Result<()> {
    if partition.len() != q.dim() {
        return Err(Error::SizeMismatch {
            expected: q.dim(),
            found: partition.len(),
        });
    }
    Ok(())
}

fn representative_rows(q: &TransitionMatrix, partition: &Partition) -> Vec<Vec<(usize, f64)>> {
    partition
        .representatives()
        .iter()
        .map(|&x| block_row(q, partition, x))
        .collect()
}

pub fn lumpability_check(
    q: &TransitionMatrix,
    partition: &Partition,
    pi: &[f64],
) -> Result<LumpabilityVerdict> {
    check_dims(q, partition)?;
    if pi.len() != q.dim() {
        return Err(Error::SizeMismatch {
            expected: q.dim(),
            found: pi.len(),
        });
    }
    let reps = representative_rows(q, partition);
    let mut ordinary_residual: f64 = 0.0;
    let mut exact_residual: f64 = 0.0;
    for x in 0..q.dim() {
        let block = partition.label(x);
        let rep = partition.representatives()[block];
        if rep == x {
            continue;
        }
        ordinary_residual =
            ordinary_residual.max(max_diff(&block_row(q, partition, x), &reps[block]));
        exact_residual = exact_residual.max((pi[x] - pi[rep]).abs());
    }
    let ordinary = ordinary_residual <= LUMP_TOL;
    Ok(LumpabilityVerdict {
        ordinary,
        exact: ordinary && exact_residual <= LUMP_TOL,
        ordinary_residual,
        exact_residual,
    })
}

/// The quotient chain `Q′(C_i, C_j) = Σ_{y ∈ C_j} Q(x, y)` for the
/// representative `x` of `C_i`.
pub fn quotient_chain(q: &TransitionMatrix, partition: &Partition) -> Result<TransitionMatrix> {
    check_dims(q, partition)?;
    let reps = representative_rows(q, partition);
    let mut residual: f64 = 0.0;
    for x in 0..q.dim() {
        let block = partition.label(x);
        if partition.representatives()[block] != x {
            residual = residual.max(max_diff(&block_row(q, partition, x), &reps[block]));
        }
    }
    if residual > LUMP_TOL {
        return Err(Error::NotLumpable { residual });
    }
    TransitionMatrix::from_rows(reps)
}

/// Block masses of a distribution.
pub fn aggregate(p: &[f64], partition: &Partition) -> Vec<f64> {
    let mut out = vec![0.0; partition.num_blocks()];
    for (i, &x) in p.iter().enumerate() {
        out[partition.label(i)] += x;
    }
    out
}
