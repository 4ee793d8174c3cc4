use std::collections::VecDeque;

use super::{ExactDistribution, Partition, StateSpace};
use crate::error::{Error, Result};
use crate::model::FactorGraph;

/// Largest assignment space for which a transition matrix is built.
pub const MAX_CHAIN_STATES: u128 = 1 << 16;

const ROW_SUM_TOL: f64 = 1e-12;

/// Row-stochastic matrix in compressed sparse row form. Columns within a
/// row are sorted and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl TransitionMatrix {
    /// Builds from per-row `(column, probability)` lists. Duplicate columns
    /// are summed and zero entries dropped.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_unstable_by_key(|&(j, _)| j);
            let mut sum = 0.0;
            for (j, p) in row {
                if j >= n {
                    return Err(Error::SizeMismatch {
                        expected: n,
                        found: j + 1,
                    });
                }
                if !(p.is_finite() && p >= 0.0) {
                    return Err(Error::Mismatch(format!(
                        "transition ({i}, {j}) has invalid probability {p}"
                    )));
                }
                sum += p;
                if p == 0.0 {
                    continue;
                }
                if col.len() > row_ptr[i] && *col.last().unwrap() == j {
                    *val.last_mut().unwrap() += p;
                } else {
                    col.push(j);
                    val.push(p);
                }
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Mismatch(format!("row {i} sums to {sum}")));
            }
            row_ptr.push(col.len());
        }
        Ok(TransitionMatrix { row_ptr, col, val })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut sparse = Vec::with_capacity(n);
        for row in rows {
            if row.len() != n {
                return Err(Error::SizeMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            sparse.push(row.iter().copied().enumerate().collect());
        }
        Self::from_rows(sparse)
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()]
            .iter()
            .copied()
            .zip(self.val[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col[r.clone()].binary_search(&j) {
            Ok(k) => self.val[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                for (j, p) in self.row(i) {
                    row[j] = p;
                }
                row
            })
            .collect()
    }

    /// `out = p Q`.
    pub fn left_multiply(&self, p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (j, q) in self.row(i) {
                out[j] += pi * q;
            }
        }
    }

    pub fn row_sum_residual(&self) -> f64 {
        (0..self.dim())
            .map(|i| (self.row(i).map(|(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max |(πQ − π)_j|`.
    pub fn stationary_residual(&self, pi: &[f64]) -> Result<f64> {
        self.check_len(pi)?;
        let mut out = vec![0.0; self.dim()];
        self.left_multiply(pi, &mut out);
        Ok(out
            .iter()
            .zip(pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// `max |π_i Q(i,j) − π_j Q(j,i)|` over all pairs.
    pub fn detailed_balance_residual(&self, pi: &[f64]) -> Result<f64> {
        self.check_len(pi)?;
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for (j, q) in self.row(i) {
                worst = worst.max((pi[i] * q - pi[j] * self.get(j, i)).abs());
            }
        }
        Ok(worst)
    }

    /// Errors unless the chain is irreducible and aperiodic.
    pub fn check_ergodic(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::NonErgodic("empty chain".into()));
        }
        let level = self.bfs_levels();
        if let Some(v) = level.iter().position(|&l| l == usize::MAX) {
            return Err(Error::NonErgodic(format!(
                "state {v} is unreachable from state 0"
            )));
        }
        let mut reverse = vec![Vec::new(); n];
        for i in 0..n {
            for (j, _) in self.row(i) {
                reverse[j].push(i);
            }
        }
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            for &w in &reverse[u] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        if let Some(v) = seen.iter().position(|&s| !s) {
            return Err(Error::NonErgodic(format!(
                "state 0 is unreachable from state {v}"
            )));
        }
        let mut period = 0usize;
        for i in 0..n {
            for (j, _) in self.row(i) {
                period = gcd(period, (level[i] + 1).abs_diff(level[j]));
            }
        }
        if period != 1 {
            return Err(Error::NonErgodic(format!("chain has period {period}")));
        }
        Ok(())
    }

    fn bfs_levels(&self) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.dim()];
        level[0] = 0;
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            for (w, _) in self.row(u) {
                if level[w] == usize::MAX {
                    level[w] = level[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        level
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::SizeMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Random-scan Gibbs chain over the supported assignments of a model.
#[derive(Debug, Clone)]
pub struct GibbsChain {
    space: StateSpace,
    states: Vec<usize>,
    index: Vec<usize>,
    matrix: TransitionMatrix,
    stationary: Vec<f64>,
}

/// Exact random-scan Gibbs kernel: a uniformly chosen non-evidence variable
/// is resampled from its conditional. Zero-weight assignments are dropped
/// from the state space.
pub fn build_gibbs_transition_matrix(model: &FactorGraph) -> Result<GibbsChain> {
    let dist = ExactDistribution::compute_with_limit(model, MAX_CHAIN_STATES)?;
    let space = dist.space().clone();
    let states: Vec<usize> = (0..space.size())
        .filter(|&r| dist.probs()[r] > 0.0)
        .collect();
    let mut index = vec![usize::MAX; space.size()];
    for (i, &r) in states.iter().enumerate() {
        index[r] = i;
    }
    let free = space.free_variables().to_vec();
    let m = free.len();
    let mut rows = Vec::with_capacity(states.len());
    let mut s = space.decode(0);
    let mut cond = Vec::new();
    for &rank in &states {
        space.decode_into(rank, &mut s);
        let mut row = Vec::with_capacity(m + 1);
        if m == 0 {
            row.push((index[rank], 1.0));
        }
        for &v in &free {
            model.conditional_into(&mut s, v, &mut cond)?;
            let here = s[v];
            let place = space.place_value(v);
            for (a, &p) in cond.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let target = rank - here * place + a * place;
                row.push((index[target], p / m as f64));
            }
        }
        rows.push(row);
    }
    let matrix = TransitionMatrix::from_rows(rows)?;
    matrix.check_ergodic()?;
    let stationary = states.iter().map(|&r| dist.probs()[r]).collect();
    Ok(GibbsChain {
        space,
        states,
        index,
        matrix,
        stationary,
    })
}

impl GibbsChain {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.matrix
    }

    /// The model distribution restricted to chain states.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Assignment rank of chain state `i`.
    pub fn rank_of(&self, i: usize) -> usize {
        self.states[i]
    }

    /// Chain state of an assignment rank, if supported.
    pub fn state_of(&self, rank: usize) -> Option<usize> {
        self.index.get(rank).copied().filter(|&i| i != usize::MAX)
    }

    /// Restricts a partition of assignment ranks to the chain states.
    pub fn restrict_partition(&self, partition: &Partition) -> Result<Partition> {
        if partition.len() != self.space.size() {
            return Err(Error::SizeMismatch {
                expected: self.space.size(),
                found: partition.len(),
            });
        }
        Ok(Partition::from_labels(
            self.states.iter().map(|&r| partition.label(r)).collect(),
        ))
    }
}
