//! Exact single-variable marginals by conditioning. Given a set `C` of free
//! variables such that no factor mentions two free variables outside `C`,
//! the remaining variables are independent given `C`, so only the
//! assignments of `C` need enumerating.

use super::{ExactDistribution, StateSpace};
use crate::error::{Error, Result};
use crate::model::FactorGraph;

/// Free variables left outside the conditioning set: a greedy independent
/// set of the factor-sharing graph, scanned from the highest id down.
pub fn eliminable_variables(model: &FactorGraph) -> Vec<usize> {
    let mut in_set = vec![false; model.num_variables()];
    let mut out = Vec::new();
    for &v in model.free_variables().iter().rev() {
        if model.neighbors(v).iter().all(|&u| !in_set[u]) {
            in_set[v] = true;
            out.push(v);
        }
    }
    out.reverse();
    out
}

/// Single-variable marginals by enumerating the conditioning set. Errors if
/// the conditioning set has more than `limit` assignments.
pub fn conditioned_single_marginals(model: &FactorGraph, limit: u128) -> Result<Vec<Vec<f64>>> {
    let eliminated = eliminable_variables(model);
    let mut excluded = vec![false; model.num_variables()];
    for &v in &eliminated {
        excluded[v] = true;
    }
    let cond: Vec<usize> = model
        .free_variables()
        .iter()
        .copied()
        .filter(|&v| !excluded[v])
        .collect();
    let mut size: u128 = 1;
    for &v in &cond {
        size = size.saturating_mul(model.cardinality(v) as u128);
    }
    if size > limit {
        return Err(Error::SpaceTooLarge { size, limit });
    }

    let mut s = model.evidence_assignment();
    let mut scratch = Vec::new();
    // First pass: log weight of every conditioning assignment.
    let mut log_w = Vec::with_capacity(size as usize);
    loop {
        let mut lw = model.log_weight_without(&s, &excluded);
        for &v in &eliminated {
            lw += local_log_sum(model, &mut s, v, &mut scratch);
        }
        log_w.push(lw);
        if !increment(model, &cond, &mut s) {
            break;
        }
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::NoSupportedState);
    }
    let weights: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = weights.iter().sum();

    let mut marg: Vec<Vec<f64>> = model
        .variables()
        .iter()
        .map(|v| vec![0.0; v.cardinality])
        .collect();
    let mut s = model.evidence_assignment();
    for &w in &weights {
        if w > 0.0 {
            let w = w / total;
            for &v in &cond {
                marg[v][s[v]] += w;
            }
            for &v in &eliminated {
                model.conditional_into(&mut s, v, &mut scratch)?;
                for (m, p) in marg[v].iter_mut().zip(&scratch) {
                    *m += w * p;
                }
            }
        }
        increment(model, &cond, &mut s);
    }
    for (v, e) in model.evidence().iter().enumerate() {
        if let Some(value) = *e {
            marg[v][value] = 1.0;
        }
    }
    Ok(marg)
}

/// Exact single-variable marginals, by full enumeration when the space is
/// within `limit` and by conditioning otherwise.
pub fn exact_single_marginals(model: &FactorGraph, limit: u128) -> Result<Vec<Vec<f64>>> {
    match StateSpace::with_limit(model, limit) {
        Ok(_) => Ok(ExactDistribution::compute_with_limit(model, limit)?.single_marginals(model)),
        Err(Error::SpaceTooLarge { .. }) => conditioned_single_marginals(model, limit),
        Err(e) => Err(e),
    }
}

fn local_log_sum(model: &FactorGraph, s: &mut [usize], v: usize, scratch: &mut Vec<f64>) -> f64 {
    let original = s[v];
    scratch.clear();
    for a in 0..model.cardinality(v) {
        s[v] = a;
        scratch.push(model.local_log_weight(s, v));
    }
    s[v] = original;
    let max = scratch.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + scratch.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

fn increment(model: &FactorGraph, vars: &[usize], s: &mut [usize]) -> bool {
    for &v in vars.iter().rev() {
        s[v] += 1;
        if s[v] < model.cardinality(v) {
            return true;
        }
        s[v] = 0;
    }
    false
}
