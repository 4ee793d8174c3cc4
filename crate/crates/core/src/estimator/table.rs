use std::sync::Arc;

use super::EstimatorKind;
use crate::error::{Error, Result};
use crate::group::{variable_orbits, GeneratingSet, VariablePartition};
use crate::model::FactorGraph;
use crate::sampler::SampleSink;

/// All single-variable marginals at once. Counts are pooled over each block
/// of a variable partition: singleton blocks give the standard estimator,
/// variable orbits give the orbit-averaged one. Per-sample cost is `O(n)`.
#[derive(Debug, Clone)]
pub struct MarginalTable {
    kind: EstimatorKind,
    partition: Arc<VariablePartition>,
    /// `counts[block][value]`.
    counts: Vec<Vec<u64>>,
    count: u64,
}

impl MarginalTable {
    pub fn standard(model: &FactorGraph) -> Self {
        let partition = Arc::new(VariablePartition::singletons(model.num_variables()));
        Self::build(EstimatorKind::Standard, model, partition).expect("singletons share domains")
    }

    pub fn rao_blackwell(model: &FactorGraph, group: &GeneratingSet) -> Result<Self> {
        if group.degree() != model.num_variables() {
            return Err(Error::SizeMismatch {
                expected: model.num_variables(),
                found: group.degree(),
            });
        }
        Self::with_partition(model, Arc::new(variable_orbits(group)))
    }

    /// Orbit-averaged table over a precomputed partition, so chains can share it.
    pub fn with_partition(model: &FactorGraph, partition: Arc<VariablePartition>) -> Result<Self> {
        Self::build(EstimatorKind::RaoBlackwell, model, partition)
    }

    pub fn new(kind: EstimatorKind, model: &FactorGraph, group: &GeneratingSet) -> Result<Self> {
        match kind {
            EstimatorKind::Standard => Ok(Self::standard(model)),
            EstimatorKind::RaoBlackwell => Self::rao_blackwell(model, group),
        }
    }

    fn build(
        kind: EstimatorKind,
        model: &FactorGraph,
        partition: Arc<VariablePartition>,
    ) -> Result<Self> {
        if partition.num_variables() != model.num_variables() {
            return Err(Error::SizeMismatch {
                expected: model.num_variables(),
                found: partition.num_variables(),
            });
        }
        let mut counts = Vec::with_capacity(partition.blocks().len());
        for block in partition.blocks() {
            let card = model.cardinality(block[0]);
            if block.iter().any(|&v| model.cardinality(v) != card) {
                return Err(Error::InvalidModel(format!(
                    "variables {block:?} share an orbit but not a domain"
                )));
            }
            counts.push(vec![0; card]);
        }
        Ok(MarginalTable {
            kind,
            partition,
            counts,
            count: 0,
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    #[inline]
    pub fn observe(&mut self, s: &[usize]) {
        let labels = self.partition.block_labels();
        for (&b, &x) in labels.iter().zip(s) {
            self.counts[b][x] += 1;
        }
        self.count += 1;
    }

    /// Indicator evaluations so far: one per variable per sample.
    pub fn indicator_evaluations(&self) -> u64 {
        self.count * self.partition.num_variables() as u64
    }

    pub fn estimate(&self, v: usize, value: usize) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::EmptyAccumulator);
        }
        let b = self.partition.block_of(v);
        let size = self.partition.blocks()[b].len() as u64;
        Ok(self.counts[b][value] as f64 / (self.count * size) as f64)
    }

    /// Estimated categorical marginal of every variable.
    pub fn marginals(&self) -> Result<Vec<Vec<f64>>> {
        if self.count == 0 {
            return Err(Error::EmptyAccumulator);
        }
        let per_block: Vec<Vec<f64>> = self
            .counts
            .iter()
            .zip(self.partition.blocks())
            .map(|(c, block)| {
                let denom = (self.count * block.len() as u64) as f64;
                c.iter().map(|&k| k as f64 / denom).collect()
            })
            .collect();
        Ok(self
            .partition
            .block_labels()
            .iter()
            .map(|&b| per_block[b].clone())
            .collect())
    }

    pub fn merge(&mut self, other: &MarginalTable) -> Result<()> {
        if self.kind != other.kind
            || !(Arc::ptr_eq(&self.partition, &other.partition)
                || self.partition == other.partition)
        {
            return Err(Error::AccumulatorMismatch("different tables".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.count += other.count;
        Ok(())
    }
}

impl SampleSink for MarginalTable {
    fn observe(&mut self, s: &[usize]) {
        MarginalTable::observe(self, s)
    }
}
