//! Desk-scale exact machinery: joint enumeration, exact marginals, orbit
//! partitions of the assignment space, Gibbs transition matrices,
//! lumpability, quotient chains, mixing times and the bias bound of the
//! orbit-averaged estimator.
//!
//! Assignments of the non-evidence variables are ranked in mixed radix with
//! the lowest variable id as the most significant digit.

mod chain;
mod cutset;
mod lumping;
mod mixing;
mod orbits;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{FactorGraph, MarginalQuery};
use crate::numeric::NeumaierSum;

pub use chain::{build_gibbs_transition_matrix, GibbsChain, TransitionMatrix, MAX_CHAIN_STATES};
pub use cutset::{conditioned_single_marginals, eliminable_variables, exact_single_marginals};
pub use lumping::{aggregate, lumpability_check, quotient_chain, LumpabilityVerdict, LUMP_TOL};
pub use mixing::{
    bias_bound_check, compare_mixing, mixing_time, mixing_times, rb_bias_after, tv_distance,
    BiasReport, MixingRow, DEFAULT_T_MAX,
};
pub use orbits::{
    group_closure, mixture_check, mixture_residual, orbit_conditionals, orbit_hits,
    orbit_partition, orbit_partition_with_limit, Partition,
};

/// Default cap on the number of enumerated assignments.
pub const DEFAULT_SPACE_LIMIT: u128 = 1 << 20;

/// Mixed-radix indexing of the evidence-consistent assignments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    free: Vec<usize>,
    radix: Vec<usize>,
    place: Vec<usize>,
    base: Vec<usize>,
    size: usize,
}

impl StateSpace {
    pub fn new(model: &FactorGraph) -> Result<Self> {
        Self::with_limit(model, DEFAULT_SPACE_LIMIT)
    }

    pub fn with_limit(model: &FactorGraph, limit: u128) -> Result<Self> {
        let free = model.free_variables().to_vec();
        let radix: Vec<usize> = free.iter().map(|&v| model.cardinality(v)).collect();
        let mut size: u128 = 1;
        for &r in &radix {
            size = size.saturating_mul(r as u128);
        }
        if size > limit {
            return Err(Error::SpaceTooLarge { size, limit });
        }
        let mut place = vec![0; model.num_variables()];
        let mut stride = 1;
        for (&v, &r) in free.iter().zip(&radix).rev() {
            place[v] = stride;
            stride *= r;
        }
        Ok(StateSpace {
            free,
            radix,
            place,
            base: model.evidence_assignment(),
            size: size as usize,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn free_variables(&self) -> &[usize] {
        &self.free
    }

    /// Rank weight of variable `v` (0 for evidence variables).
    #[inline]
    pub fn place_value(&self, v: usize) -> usize {
        self.place[v]
    }

    /// Writes the free-variable digits of `rank` into `s`; evidence
    /// positions of `s` are left untouched.
    pub fn decode_into(&self, mut rank: usize, s: &mut [usize]) {
        for (&v, &r) in self.free.iter().zip(&self.radix).rev() {
            s[v] = rank % r;
            rank /= r;
        }
    }

    pub fn decode(&self, rank: usize) -> Vec<usize> {
        let mut s = self.base.clone();
        self.decode_into(rank, &mut s);
        s
    }

    #[inline]
    pub fn encode(&self, s: &[usize]) -> usize {
        self.free.iter().map(|&v| s[v] * self.place[v]).sum()
    }

    /// Advances `s` to the next rank; returns false after the last one.
    #[inline]
    fn increment(&self, s: &mut [usize]) -> bool {
        for (&v, &r) in self.free.iter().zip(&self.radix).rev() {
            s[v] += 1;
            if s[v] < r {
                return true;
            }
            s[v] = 0;
        }
        false
    }

    /// Calls `f(rank, s)` for ranks `start..end` in order.
    pub fn for_each_in(&self, start: usize, end: usize, mut f: impl FnMut(usize, &[usize])) {
        if start >= end {
            return;
        }
        let mut s = self.decode(start);
        for rank in start..end {
            f(rank, &s);
            self.increment(&mut s);
        }
    }

    pub fn for_each(&self, f: impl FnMut(usize, &[usize])) {
        self.for_each_in(0, self.size, f)
    }
}

/// The normalized model distribution over a [`StateSpace`].
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    space: StateSpace,
    probs: Vec<f64>,
    log_partition: f64,
}

const CHUNK: usize = 1 << 14;

impl ExactDistribution {
    pub fn compute(model: &FactorGraph) -> Result<Self> {
        Self::compute_with_limit(model, DEFAULT_SPACE_LIMIT)
    }

    pub fn compute_with_limit(model: &FactorGraph, limit: u128) -> Result<Self> {
        let space = StateSpace::with_limit(model, limit)?;
        let mut probs = vec![0.0; space.size()];
        probs
            .par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let start = c * CHUNK;
                space.for_each_in(start, start + chunk.len(), |rank, s| {
                    chunk[rank - start] = model.log_weight_unchecked(s);
                });
            });
        let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::NoSupportedState);
        }
        let mut total = NeumaierSum::new();
        for p in probs.iter_mut() {
            *p = (*p - max).exp();
            total.add(*p);
        }
        let total = total.value();
        for p in probs.iter_mut() {
            *p /= total;
        }
        Ok(ExactDistribution {
            space,
            probs,
            log_partition: max + total.ln(),
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// Probabilities indexed by rank.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// `P(X̂ = x̂)`.
    pub fn marginal(&self, query: &MarginalQuery) -> f64 {
        let mut acc = NeumaierSum::new();
        self.space.for_each(|rank, s| {
            if query.matches(s) {
                acc.add(self.probs[rank]);
            }
        });
        acc.value()
    }

    /// Per-variable categorical marginals for every variable; evidence
    /// variables get a point mass.
    pub fn single_marginals(&self, model: &FactorGraph) -> Vec<Vec<f64>> {
        let mut acc: Vec<Vec<NeumaierSum>> = model
            .variables()
            .iter()
            .map(|v| vec![NeumaierSum::new(); v.cardinality])
            .collect();
        let free = self.space.free_variables();
        self.space.for_each(|rank, s| {
            let p = self.probs[rank];
            for &v in free {
                acc[v][s[v]].add(p);
            }
        });
        let mut out: Vec<Vec<f64>> = acc
            .into_iter()
            .map(|row| row.iter().map(NeumaierSum::value).collect())
            .collect();
        for (v, e) in model.evidence().iter().enumerate() {
            if let Some(value) = *e {
                out[v].iter_mut().for_each(|p| *p = 0.0);
                out[v][value] = 1.0;
            }
        }
        out
    }

    /// Converts into an i.i.d. sampler over full assignments.
    pub fn into_sampler(self) -> IidSampler {
        let mut cdf = self.probs;
        let mut acc = 0.0;
        for p in cdf.iter_mut() {
            acc += *p;
            *p = acc;
        }
        IidSampler {
            space: self.space,
            cdf,
        }
    }
}

/// Draws independent assignments from an exact distribution by inverse
/// CDF lookup.
#[derive(Debug, Clone)]
pub struct IidSampler {
    space: StateSpace,
    cdf: Vec<f64>,
}

impl IidSampler {
    pub fn sample_rank<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("nonempty space");
        let u = rng.gen::<f64>() * total;
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, s: &mut [usize]) {
        let rank = self.sample_rank(rng);
        self.space.decode_into(rank, s);
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }
}

/// `P(X̂ = x̂)` by joint enumeration.
pub fn exact_marginal(model: &FactorGraph, query: &MarginalQuery) -> Result<f64> {
    Ok(ExactDistribution::compute(model)?.marginal(query))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_model, ModelBuilder};

    #[test]
    fn ranks_are_mixed_radix_with_first_variable_most_significant() {
        let m = parse_model("var a 2\nvar b 3\nvar c 2\nevidence b 1\n").unwrap();
        let space = StateSpace::new(&m).unwrap();
        assert_eq!(space.size(), 4);
        assert_eq!(space.decode(0), vec![0, 1, 0]);
        assert_eq!(space.decode(1), vec![0, 1, 1]);
        assert_eq!(space.decode(2), vec![1, 1, 0]);
        let mut seen = Vec::new();
        space.for_each(|rank, s| {
            assert_eq!(space.encode(s), rank);
            seen.push(s.to_vec());
        });
        assert_eq!(seen.len(), 4);
        assert_eq!(seen[3], vec![1, 1, 1]);
    }

    #[test]
    fn space_limit() {
        let mut b = ModelBuilder::new();
        for i in 0..21 {
            b.add_variable(format!("v{i}"), 2).unwrap();
        }
        let m = b.build().unwrap();
        assert!(matches!(
            StateSpace::new(&m),
            Err(Error::SpaceTooLarge { .. })
        ));
        assert!(StateSpace::with_limit(&m, 1 << 21).is_ok());
    }

    #[test]
    fn empty_model_marginal_is_half() {
        let m = parse_model("var a 2\nvar b 2\n").unwrap();
        let q = MarginalQuery::single(&m, 1, 1).unwrap();
        assert_eq!(exact_marginal(&m, &q).unwrap(), 0.5);
        let d = ExactDistribution::compute(&m).unwrap();
        assert!((d.log_partition() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn hard_disagreement_marginal_is_half() {
        let m = parse_model("var x 2\nvar y 2\ntable x y 0 1 1 0\n").unwrap();
        let q = MarginalQuery::single(&m, 0, 1).unwrap();
        assert_eq!(exact_marginal(&m, &q).unwrap(), 0.5);
        let d = ExactDistribution::compute(&m).unwrap();
        assert_eq!(d.probs(), &[0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn unsupported_model_is_an_error() {
        let m = parse_model("var x 2\ntable x 0 1\nevidence x 0\n").unwrap();
        assert_eq!(
            ExactDistribution::compute(&m).unwrap_err(),
            Error::NoSupportedState
        );
    }

    #[test]
    fn single_marginals_include_evidence_point_masses() {
        let m = parse_model("var x 2\nvar y 2\nfeature 1 x=1\nevidence y 0\n").unwrap();
        let d = ExactDistribution::compute(&m).unwrap();
        let marg = d.single_marginals(&m);
        let e = 1f64.exp();
        assert!((marg[0][1] - e / (1.0 + e)).abs() < 1e-15);
        assert_eq!(marg[1], vec![1.0, 0.0]);
    }

    #[test]
    fn iid_sampler_never_returns_zero_mass_states() {
        use rand::SeedableRng;
        let m = parse_model("var x 2\nvar y 2\ntable x y 0 1 1 0\n").unwrap();
        let sampler = ExactDistribution::compute(&m).unwrap().into_sampler();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut s = vec![0, 0];
        let mut ones = 0;
        for _ in 0..2000 {
            sampler.sample_into(&mut rng, &mut s);
            assert_ne!(s[0], s[1]);
            ones += s[0];
        }
        assert!((900..1100).contains(&ones));
    }
}
