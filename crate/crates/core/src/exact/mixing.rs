use rayon::prelude::*;

use super::{
    aggregate, build_gibbs_transition_matrix, lumpability_check, orbit_partition_with_limit,
    quotient_chain, Partition, TransitionMatrix, MAX_CHAIN_STATES,
};
use crate::error::{Error, Result};
use crate::group::GeneratingSet;
use crate::model::{FactorGraph, MarginalQuery};

/// Default cap on chain steps searched by [`mixing_times`].
pub const DEFAULT_T_MAX: usize = 100_000;

/// `½ Σ |p − q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::SizeMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

pub fn mixing_time(q: &TransitionMatrix, pi: &[f64], epsilon: f64) -> Result<usize> {
    Ok(mixing_times(q, pi, &[epsilon], DEFAULT_T_MAX)?[0])
}

/// `τ(ε)` for each requested `ε`: the least `T` with
/// `max_x d_tv(Q^T(x, ·), π) ≤ ε`. Each start state's distribution is
/// propagated separately. The distance to stationarity from any start never
/// increases with `t`, so the first step under `ε` is the answer.
pub fn mixing_times(
    q: &TransitionMatrix,
    pi: &[f64],
    epsilons: &[f64],
    t_max: usize,
) -> Result<Vec<usize>> {
    if pi.len() != q.dim() {
        return Err(Error::SizeMismatch {
            expected: q.dim(),
            found: pi.len(),
        });
    }
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Error::InvalidConfig(format!("epsilon {e} outside (0, 1)")));
    }
    q.check_ergodic()?;
    let n = q.dim();
    let per_start: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut hit = vec![usize::MAX; epsilons.len()];
            let mut remaining = epsilons.len();
            let mut p = vec![0.0; n];
            let mut next = vec![0.0; n];
            p[x] = 1.0;
            for t in 0..=t_max {
                let d = tv_distance(&p, pi)?;
                for (h, &e) in hit.iter_mut().zip(epsilons) {
                    if *h == usize::MAX && d <= e {
                        *h = t;
                        remaining -= 1;
                    }
                }
                if remaining == 0 {
                    return Ok(hit);
                }
                q.left_multiply(&p, &mut next);
                std::mem::swap(&mut p, &mut next);
            }
            Err(Error::MixingCapReached { cap: t_max })
        })
        .collect::<Result<_>>()?;
    Ok((0..epsilons.len())
        .map(|k| per_start.iter().map(|h| h[k]).max().unwrap_or(0))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingRow {
    pub epsilon: f64,
    pub tau: usize,
    pub tau_quotient: usize,
}

/// Mixing times of a chain and of its quotient under an exactly lumpable
/// partition. Errors if the quotient ever mixes slower.
pub fn compare_mixing(
    q: &TransitionMatrix,
    partition: &Partition,
    pi: &[f64],
    epsilons: &[f64],
) -> Result<Vec<MixingRow>> {
    let verdict = lumpability_check(q, partition, pi)?;
    if !verdict.exact {
        return Err(Error::NotLumpable {
            residual: verdict.ordinary_residual.max(verdict.exact_residual),
        });
    }
    let quotient = quotient_chain(q, partition)?;
    let pi_quotient = aggregate(pi, partition);
    let tau = mixing_times(q, pi, epsilons, DEFAULT_T_MAX)?;
    let tau_quotient = mixing_times(&quotient, &pi_quotient, epsilons, DEFAULT_T_MAX)?;
    let rows: Vec<MixingRow> = epsilons
        .iter()
        .zip(tau.iter().zip(&tau_quotient))
        .map(|(&epsilon, (&tau, &tau_quotient))| MixingRow {
            epsilon,
            tau,
            tau_quotient,
        })
        .collect();
    if let Some(r) = rows.iter().find(|r| r.tau_quotient > r.tau) {
        return Err(Error::Mismatch(format!(
            "quotient mixing time {} exceeds {} at epsilon {}",
            r.tau_quotient, r.tau, r.epsilon
        )));
    }
    Ok(rows)
}

/// Worst-start bias of the single-sample orbit-averaged estimator after `t`
/// steps of a quotient chain: `max_O |Σ_O′ c(O′) Q′^t(O, O′) − θ|`, where
/// `c` holds the per-orbit conditionals. Returns the bias and the start block.
pub fn rb_bias_after(
    quotient: &TransitionMatrix,
    conditionals: &[f64],
    theta: f64,
    t: usize,
) -> Result<(f64, usize)> {
    let k = quotient.dim();
    if conditionals.len() != k {
        return Err(Error::SizeMismatch {
            expected: k,
            found: conditionals.len(),
        });
    }
    // Q′^t c, one right multiplication per step.
    let mut e = conditionals.to_vec();
    let mut next = vec![0.0; k];
    for _ in 0..t {
        for (i, out) in next.iter_mut().enumerate() {
            *out = quotient.row(i).map(|(j, p)| p * e[j]).sum();
        }
        std::mem::swap(&mut e, &mut next);
    }
    Ok(e.iter()
        .enumerate()
        .map(|(i, &v)| ((v - theta).abs(), i))
        .fold(
            (0.0, 0),
            |best, cur| if cur.0 > best.0 { cur } else { best },
        ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub epsilon: f64,
    /// Steps taken before the single sample.
    pub t: usize,
    pub tau_quotient: usize,
    pub theta: f64,
    /// Exact worst-start `|E[θ̂] − θ|`.
    pub bias: f64,
    /// Start assignment attaining the worst bias.
    pub worst_start: Vec<usize>,
    pub within_bound: bool,
    /// `t` is below the quotient mixing time, so the bound is not promised.
    pub below_mixing_time: bool,
}

/// Exact bias of the N=1 orbit-averaged estimator after `t` Gibbs steps
/// (default `τ′(ε)`), maximized over start states.
pub fn bias_bound_check(
    model: &FactorGraph,
    group: &GeneratingSet,
    query: &MarginalQuery,
    epsilon: f64,
    t: Option<usize>,
) -> Result<BiasReport> {
    let chain = build_gibbs_transition_matrix(model)?;
    let orbits = orbit_partition_with_limit(group, model, MAX_CHAIN_STATES)?;
    let partition = chain.restrict_partition(&orbits)?;
    let pi = chain.stationary();
    let verdict = lumpability_check(chain.matrix(), &partition, pi)?;
    if !verdict.exact {
        return Err(Error::NotLumpable {
            residual: verdict.ordinary_residual.max(verdict.exact_residual),
        });
    }
    let quotient = quotient_chain(chain.matrix(), &partition)?;
    let pi_quotient = aggregate(pi, &partition);
    let tau_quotient = mixing_times(&quotient, &pi_quotient, &[epsilon], DEFAULT_T_MAX)?[0];
    let t = t.unwrap_or(tau_quotient);

    let space = chain.space();
    let mut hits = vec![0usize; partition.num_blocks()];
    let mut theta = 0.0;
    for i in 0..chain.num_states() {
        let s = space.decode(chain.rank_of(i));
        if query.matches(&s) {
            hits[partition.label(i)] += 1;
            theta += pi[i];
        }
    }
    let conditionals: Vec<f64> = hits
        .iter()
        .zip(partition.sizes())
        .map(|(&h, &n)| h as f64 / n as f64)
        .collect();
    let (bias, block) = rb_bias_after(&quotient, &conditionals, theta, t)?;
    Ok(BiasReport {
        epsilon,
        t,
        tau_quotient,
        theta,
        bias,
        worst_start: space.decode(chain.rank_of(partition.representatives()[block])),
        within_bound: bias <= epsilon,
        below_mixing_time: t < tau_quotient,
    })
}
