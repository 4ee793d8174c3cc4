//! Marginal density estimation for discrete log-linear models that exploits
//! known variable symmetries.
//!
//! The orbit-averaged estimator replaces the indicator `1{s⟨X̂⟩ = x̂}` of
//! the sample-frequency estimator with the fraction of the query's orbit
//! under a model automorphism group that the sample satisfies.

pub mod error;
pub mod estimator;
pub mod exact;
pub mod experiment;
pub mod group;
pub mod model;
pub mod numeric;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
pub use estimator::{EstimateAccumulator, EstimatorKind, MarginalTable};
pub use exact::{exact_marginal, ExactDistribution};
pub use group::{GeneratingSet, Permutation, SequenceOrbit};
pub use model::{FactorGraph, MarginalQuery, ModelBuilder};
pub use sampler::{SamplerConfig, ScanOrder};
