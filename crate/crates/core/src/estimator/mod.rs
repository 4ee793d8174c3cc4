//! Streaming marginal estimators: the sample-frequency estimator and the
//! orbit-averaged (Rao-Blackwell) estimator.
//!
//! Both accumulate integer counts, so merging partial accumulators is exact
//! and independent of order.

mod table;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group::{orbit_hamming_weight, orbit_of_sequence, GeneratingSet, SequenceOrbit};
use crate::model::MarginalQuery;
use crate::sampler::SampleSink;

pub use table::MarginalTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Standard,
    RaoBlackwell,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Standard => "standard",
            EstimatorKind::RaoBlackwell => "rb",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" | "std" | "mc" => Ok(EstimatorKind::Standard),
            "rb" | "rao-blackwell" | "raoblackwell" => Ok(EstimatorKind::RaoBlackwell),
            _ => Err(Error::InvalidConfig(format!("unknown estimator `{s}`"))),
        }
    }
}

/// Running estimate of `P(X̂ = x̂)`.
#[derive(Debug, Clone)]
pub struct EstimateAccumulator {
    kind: EstimatorKind,
    query: Arc<MarginalQuery>,
    orbit: Option<Arc<SequenceOrbit>>,
    count: u64,
    hits: u64,
    evaluations: u64,
}

impl EstimateAccumulator {
    pub fn standard(query: Arc<MarginalQuery>) -> Self {
        EstimateAccumulator {
            kind: EstimatorKind::Standard,
            query,
            orbit: None,
            count: 0,
            hits: 0,
            evaluations: 0,
        }
    }

    /// `orbit` must be the orbit of the query's variable sequence.
    pub fn rao_blackwell(query: Arc<MarginalQuery>, orbit: Arc<SequenceOrbit>) -> Result<Self> {
        if orbit.base() != query.vars() {
            return Err(Error::AccumulatorMismatch(
                "orbit was not built from the query variables".into(),
            ));
        }
        Ok(EstimateAccumulator {
            kind: EstimatorKind::RaoBlackwell,
            query,
            orbit: Some(orbit),
            count: 0,
            hits: 0,
            evaluations: 0,
        })
    }

    /// Builds the query orbit under `group` and wraps it.
    pub fn rao_blackwell_for(query: Arc<MarginalQuery>, group: &GeneratingSet) -> Result<Self> {
        let orbit = Arc::new(orbit_of_sequence(group, query.vars())?);
        Self::rao_blackwell(query, orbit)
    }

    pub fn new(
        kind: EstimatorKind,
        query: Arc<MarginalQuery>,
        group: &GeneratingSet,
    ) -> Result<Self> {
        match kind {
            EstimatorKind::Standard => Ok(Self::standard(query)),
            EstimatorKind::RaoBlackwell => Self::rao_blackwell_for(query, group),
        }
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn query(&self) -> &MarginalQuery {
        &self.query
    }

    pub fn orbit(&self) -> Option<&SequenceOrbit> {
        self.orbit.as_deref()
    }

    /// Number of observed samples `N`.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// Indicator tests `s⟨A⟩ = x̂` performed so far.
    pub fn indicator_evaluations(&self) -> u64 {
        self.evaluations
    }

    fn orbit_len(&self) -> u64 {
        self.orbit.as_ref().map_or(1, |o| o.len() as u64)
    }

    /// Contribution of one sample: a multiple of `1/|X̂^G|` in `[0, 1]`.
    pub fn contribution(&self, s: &[usize]) -> f64 {
        self.hits_of(s) as f64 / self.orbit_len() as f64
    }

    #[inline]
    fn hits_of(&self, s: &[usize]) -> u64 {
        match &self.orbit {
            None => self.query.matches(s) as u64,
            Some(orbit) => orbit_hamming_weight(s, &self.query, orbit) as u64,
        }
    }

    pub fn observe(&mut self, s: &[usize]) {
        self.hits += self.hits_of(s);
        self.count += 1;
        self.evaluations += self.orbit_len();
    }

    /// Sum of contributions.
    pub fn sum(&self) -> f64 {
        self.hits as f64 / self.orbit_len() as f64
    }

    pub fn estimate(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::EmptyAccumulator);
        }
        Ok(self.hits as f64 / (self.count * self.orbit_len()) as f64)
    }

    /// Adds another accumulator's counts. Both must have the same kind,
    /// query and orbit.
    pub fn merge(&mut self, other: &EstimateAccumulator) -> Result<()> {
        if self.kind != other.kind {
            return Err(Error::AccumulatorMismatch(format!(
                "cannot merge {} into {}",
                other.kind, self.kind
            )));
        }
        if self.query != other.query {
            return Err(Error::AccumulatorMismatch("different queries".into()));
        }
        let same_orbit = match (&self.orbit, &other.orbit) {
            (Some(a), Some(b)) => Arc::ptr_eq(a, b) || a == b,
            (None, None) => true,
            _ => false,
        };
        if !same_orbit {
            return Err(Error::AccumulatorMismatch("different orbits".into()));
        }
        self.count += other.count;
        self.hits += other.hits;
        self.evaluations += other.evaluations;
        Ok(())
    }
}

impl SampleSink for EstimateAccumulator {
    fn observe(&mut self, s: &[usize]) {
        EstimateAccumulator::observe(self, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Permutation;
    use crate::model::{FactorGraph, ModelBuilder};

    fn four() -> FactorGraph {
        let mut b = ModelBuilder::new();
        for name in ["smokes(A)", "smokes(B)", "cancer(A)", "cancer(B)"] {
            b.add_variable(name, 2).unwrap();
        }
        b.build().unwrap()
    }

    fn swap() -> GeneratingSet {
        let g = Permutation::from_cycles(4, &[vec![0, 1], vec![2, 3]]).unwrap();
        GeneratingSet::new(4, vec![g]).unwrap()
    }

    #[test]
    fn example_sample_contributions() {
        let m = four();
        let q = Arc::new(MarginalQuery::single(&m, 0, 1).unwrap());
        let mut std = EstimateAccumulator::standard(q.clone());
        let mut rb = EstimateAccumulator::rao_blackwell_for(q, &swap()).unwrap();
        std.observe(&[1, 0, 1, 0]);
        rb.observe(&[1, 0, 1, 0]);
        assert_eq!(std.estimate().unwrap(), 1.0);
        assert_eq!(rb.estimate().unwrap(), 0.5);
        assert_eq!(rb.indicator_evaluations(), 2);
    }

    #[test]
    fn trivial_group_matches_standard() {
        let m = four();
        let q = Arc::new(MarginalQuery::new(&m, vec![0, 3], vec![1, 0]).unwrap());
        let std = EstimateAccumulator::standard(q.clone());
        let rb = EstimateAccumulator::rao_blackwell_for(q, &GeneratingSet::trivial(4)).unwrap();
        for bits in 0..16usize {
            let s: Vec<usize> = (0..4).map(|i| (bits >> i) & 1).collect();
            assert_eq!(std.contribution(&s), rb.contribution(&s));
        }
    }

    #[test]
    fn estimates_and_errors() {
        let m = four();
        let q = Arc::new(MarginalQuery::single(&m, 2, 1).unwrap());
        let mut acc = EstimateAccumulator::standard(q.clone());
        assert_eq!(acc.estimate(), Err(Error::EmptyAccumulator));
        for _ in 0..10 {
            acc.observe(&[0, 0, 0, 0]);
        }
        assert_eq!(acc.estimate().unwrap(), 0.0);
        let mut all = EstimateAccumulator::standard(q.clone());
        for _ in 0..5 {
            all.observe(&[0, 0, 1, 0]);
        }
        assert_eq!(all.estimate().unwrap(), 1.0);
        let rb = EstimateAccumulator::rao_blackwell_for(q, &swap()).unwrap();
        assert!(matches!(acc.merge(&rb), Err(Error::AccumulatorMismatch(_))));
        let other = Arc::new(MarginalQuery::single(&m, 1, 1).unwrap());
        assert!(acc.merge(&EstimateAccumulator::standard(other)).is_err());
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let m = four();
        let q = Arc::new(MarginalQuery::single(&m, 0, 1).unwrap());
        let mut rb = EstimateAccumulator::rao_blackwell_for(q.clone(), &swap()).unwrap();
        rb.observe(&[1, 1, 0, 0]);
        rb.observe(&[1, 0, 0, 0]);
        let before = rb.estimate().unwrap();
        let empty =
            EstimateAccumulator::rao_blackwell(q, Arc::new(rb.orbit().unwrap().clone())).unwrap();
        rb.merge(&empty).unwrap();
        assert_eq!(rb.estimate().unwrap(), before);
        assert_eq!(before, 0.75);
    }

    #[test]
    fn orbit_must_match_query() {
        let m = four();
        let q = Arc::new(MarginalQuery::single(&m, 0, 1).unwrap());
        let orbit = Arc::new(orbit_of_sequence(&swap(), &[2]).unwrap());
        assert!(EstimateAccumulator::rao_blackwell(q, orbit).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(
            "rb".parse::<EstimatorKind>().unwrap(),
            EstimatorKind::RaoBlackwell
        );
        assert_eq!(
            "Standard".parse::<EstimatorKind>().unwrap(),
            EstimatorKind::Standard
        );
        assert!("gibbs".parse::<EstimatorKind>().is_err());
    }
}
