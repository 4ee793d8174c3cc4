use thiserror::Error;

/// Errors produced by model construction, group handling, sampling,
/// estimation and exact analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("value {value} out of domain for variable `{variable}` (cardinality {cardinality})")]
    OutOfDomain {
        variable: String,
        value: usize,
        cardinality: usize,
    },

    #[error("non-finite weight {0}")]
    NonFiniteWeight(f64),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("orbit exceeds the cap of {cap} members")]
    OrbitTooLarge { cap: usize },

    #[error("assignment is inconsistent with evidence on variable {0}")]
    EvidenceMismatch(usize),

    #[error("variable {0} is clamped by evidence")]
    ClampedVariable(usize),

    #[error("every value of variable {0} has zero weight in the current state")]
    ZeroConditional(usize),

    #[error("no assignment with positive weight found")]
    NoSupportedState,

    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),

    #[error("estimate requested from an empty accumulator")]
    EmptyAccumulator,

    #[error("cannot merge accumulators: {0}")]
    AccumulatorMismatch(String),

    #[error("assignment space of {size} states exceeds the limit of {limit}")]
    SpaceTooLarge { size: u128, limit: u128 },

    #[error("Markov chain is not ergodic: {0}")]
    NonErgodic(String),

    #[error("partition is not lumpable (residual {residual:e})")]
    NotLumpable { residual: f64 },

    #[error("mixing time search reached the cap of {cap} steps")]
    MixingCapReached { cap: usize },

    #[error("unsupported template `{0}`")]
    UnknownTemplate(String),

    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
