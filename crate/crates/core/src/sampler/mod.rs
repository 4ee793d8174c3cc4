//! Single-site Gibbs sampling with reproducible multi-chain seeding.
//!
//! Chain `c` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to stream
//! `c`, so chains never share random numbers and each is reproducible on
//! its own.

mod dump;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::FactorGraph;

pub use dump::{read_dump, DumpWriter};

/// Uniform draws tried by [`init_state`] before greedy repair.
pub const INIT_TRIES: usize = 10_000;
const REPAIR_SWEEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanOrder {
    /// Pick the variable to update uniformly at random.
    #[default]
    Random,
    /// Cycle through the free variables in id order.
    Systematic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplerConfig {
    /// Single-site updates discarded before the first sample.
    pub burn_in: usize,
    /// Samples delivered per chain.
    pub samples: usize,
    /// Single-site updates between delivered samples.
    pub thinning: usize,
    pub seed: u64,
    pub chains: usize,
    pub scan: ScanOrder,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            burn_in: 0,
            samples: 1000,
            thinning: 1,
            seed: 0,
            chains: 1,
            scan: ScanOrder::Random,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be at least 1".into()));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidConfig("thinning must be at least 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::InvalidConfig("chains must be at least 1".into()));
        }
        Ok(())
    }
}

/// RNG for chain `chain` of a run seeded with `seed`.
pub fn chain_rng(seed: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// A supported, evidence-consistent starting assignment: up to
/// [`INIT_TRIES`] uniform draws, then greedy repair of the last draw.
pub fn init_state<R: Rng + ?Sized>(model: &FactorGraph, rng: &mut R) -> Result<Vec<usize>> {
    let mut s = model.evidence_assignment();
    let free = model.free_variables();
    for _ in 0..INIT_TRIES {
        for &v in free {
            s[v] = rng.gen_range(0..model.cardinality(v));
        }
        if model.log_weight_unchecked(&s) > f64::NEG_INFINITY {
            return Ok(s);
        }
    }
    for _ in 0..REPAIR_SWEEPS {
        let mut changed = false;
        for &v in free {
            let current = s[v];
            let mut best = (model.local_violations(&s, v), current);
            for a in 0..model.cardinality(v) {
                s[v] = a;
                let violations = model.local_violations(&s, v);
                if violations < best.0 {
                    best = (violations, a);
                }
            }
            s[v] = best.1;
            changed |= best.1 != current;
        }
        if model.log_weight_unchecked(&s) > f64::NEG_INFINITY {
            return Ok(s);
        }
        if !changed {
            break;
        }
    }
    Err(Error::NoSupportedState)
}

/// A running chain: current assignment, step counter and its own RNG.
#[derive(Debug, Clone)]
pub struct ChainState {
    current: Vec<usize>,
    step: u64,
    stream: u64,
    rng: ChaCha8Rng,
    scratch: Vec<f64>,
}

impl ChainState {
    pub fn new(model: &FactorGraph, seed: u64, stream: u64) -> Result<Self> {
        let mut rng = chain_rng(seed, stream);
        let current = init_state(model, &mut rng)?;
        Ok(ChainState {
            current,
            step: 0,
            stream,
            rng,
            scratch: Vec::new(),
        })
    }

    /// Starts from a given assignment, which must be supported.
    pub fn from_assignment(
        model: &FactorGraph,
        s: Vec<usize>,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        if model.log_weight(&s)? == f64::NEG_INFINITY {
            return Err(Error::NoSupportedState);
        }
        Ok(ChainState {
            current: s,
            step: 0,
            stream,
            rng: chain_rng(seed, stream),
            scratch: Vec::new(),
        })
    }

    pub fn current(&self) -> &[usize] {
        &self.current
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

/// One single-site update. Returns the updated variable, or `None` when
/// every variable is evidence.
pub fn gibbs_step(
    model: &FactorGraph,
    state: &mut ChainState,
    scan: ScanOrder,
) -> Result<Option<usize>> {
    let free = model.free_variables();
    let m = free.len();
    state.step += 1;
    if m == 0 {
        return Ok(None);
    }
    let v = match scan {
        ScanOrder::Random => free[state.rng.gen_range(0..m)],
        ScanOrder::Systematic => free[((state.step - 1) % m as u64) as usize],
    };
    model.conditional_into(&mut state.current, v, &mut state.scratch)?;
    let u: f64 = state.rng.gen();
    let mut acc = 0.0;
    let mut value = state.scratch.len() - 1;
    for (a, &p) in state.scratch.iter().enumerate() {
        acc += p;
        if u < acc {
            value = a;
            break;
        }
    }
    // Guard against rounding selecting an impossible trailing value.
    while state.scratch[value] == 0.0 {
        value -= 1;
    }
    state.current[v] = value;
    Ok(Some(v))
}

/// Receives sample points from a chain.
pub trait SampleSink {
    fn observe(&mut self, s: &[usize]);
}

impl<F: FnMut(&[usize])> SampleSink for F {
    fn observe(&mut self, s: &[usize]) {
        self(s)
    }
}

impl SampleSink for Vec<Vec<usize>> {
    fn observe(&mut self, s: &[usize]) {
        self.push(s.to_vec());
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSummary {
    pub chain: usize,
    pub steps: u64,
    pub samples: usize,
    pub wall_seconds: f64,
}

/// Runs chain `chain`: `burn_in` discarded updates, then `samples` points,
/// each taken `thinning` updates after the previous one.
pub fn run_chain<S: SampleSink + ?Sized>(
    model: &FactorGraph,
    config: &SamplerConfig,
    chain: usize,
    sink: &mut S,
) -> Result<ChainSummary> {
    config.validate()?;
    let start = Instant::now();
    let mut state = ChainState::new(model, config.seed, chain as u64)?;
    for _ in 0..config.burn_in {
        gibbs_step(model, &mut state, config.scan)?;
    }
    for _ in 0..config.samples {
        for _ in 0..config.thinning {
            gibbs_step(model, &mut state, config.scan)?;
        }
        sink.observe(&state.current);
    }
    Ok(ChainSummary {
        chain,
        steps: state.step,
        samples: config.samples,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs `config.chains` chains in parallel, each into a fresh sink from
/// `make_sink`. Results are in chain order.
pub fn run_chains<S, F>(
    model: &FactorGraph,
    config: &SamplerConfig,
    make_sink: F,
) -> Result<Vec<(S, ChainSummary)>>
where
    S: SampleSink + Send,
    F: Fn(usize) -> S + Sync,
{
    config.validate()?;
    (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let mut sink = make_sink(c);
            let summary = run_chain(model, config, c, &mut sink)?;
            Ok((sink, summary))
        })
        .collect()
}

/// Sequential counterpart of [`run_chains`]; produces identical results.
pub fn run_chains_sequential<S, F>(
    model: &FactorGraph,
    config: &SamplerConfig,
    make_sink: F,
) -> Result<Vec<(S, ChainSummary)>>
where
    S: SampleSink,
    F: Fn(usize) -> S,
{
    config.validate()?;
    (0..config.chains)
        .map(|c| {
            let mut sink = make_sink(c);
            let summary = run_chain(model, config, c, &mut sink)?;
            Ok((sink, summary))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    #[test]
    fn unconstrained_model_accepts_first_draw() {
        let m = parse_model("var a 2\nvar b 3\n").unwrap();
        let mut rng = chain_rng(1, 0);
        let mut expected = chain_rng(1, 0);
        let s = init_state(&m, &mut rng).unwrap();
        let first: Vec<usize> = vec![expected.gen_range(0..2), expected.gen_range(0..3)];
        assert_eq!(s, first);
    }

    #[test]
    fn hard_constraint_init() {
        let m = parse_model("var x 2\nvar y 2\ntable x y 0 1 1 0\n").unwrap();
        for seed in 0..20 {
            let s = init_state(&m, &mut chain_rng(seed, 0)).unwrap();
            assert_ne!(s[0], s[1]);
        }
    }

    #[test]
    fn repair_finds_needle_state() {
        // 20 variables that must all be 1: uniform draws essentially never hit.
        let mut text = String::new();
        for i in 0..20 {
            text.push_str(&format!("var v{i} 2\ntable v{i} 0 1\n"));
        }
        let m = parse_model(&text).unwrap();
        let s = init_state(&m, &mut chain_rng(3, 0)).unwrap();
        assert_eq!(s, vec![1; 20]);
    }

    #[test]
    fn init_is_deterministic() {
        let m = parse_model("var x 3\nvar y 3\ntable x y 0 1 1 1 0 1 1 1 0\n").unwrap();
        let a = ChainState::new(&m, 42, 2).unwrap();
        let b = ChainState::new(&m, 42, 2).unwrap();
        assert_eq!(a.current(), b.current());
    }

    #[test]
    fn evidence_never_changes() {
        let m = parse_model("var x 2\nvar y 2\nfeature 1.0 x=1 y=0\nevidence y 1\n").unwrap();
        let mut st = ChainState::new(&m, 0, 0).unwrap();
        for _ in 0..100_000 {
            gibbs_step(&m, &mut st, ScanOrder::Random).unwrap();
            assert_eq!(st.current()[1], 1);
        }
    }

    #[test]
    fn systematic_scan_cycles() {
        let m = parse_model("var a 2\nvar b 2\nvar c 2\nevidence b 0\n").unwrap();
        let mut st = ChainState::new(&m, 0, 0).unwrap();
        let order: Vec<_> = (0..4)
            .map(|_| gibbs_step(&m, &mut st, ScanOrder::Systematic).unwrap())
            .collect();
        assert_eq!(order, vec![Some(0), Some(2), Some(0), Some(2)]);
    }

    #[test]
    fn run_chain_contract() {
        let m = parse_model("var a 2\n").unwrap();
        let cfg = SamplerConfig {
            samples: 1,
            ..SamplerConfig::default()
        };
        let mut out: Vec<Vec<usize>> = Vec::new();
        let summary = run_chain(&m, &cfg, 0, &mut out).unwrap();
        assert_eq!((out.len(), summary.steps), (1, 1));

        let cfg = SamplerConfig {
            burn_in: 5,
            samples: 7,
            thinning: 10,
            ..SamplerConfig::default()
        };
        let mut out: Vec<Vec<usize>> = Vec::new();
        let summary = run_chain(&m, &cfg, 0, &mut out).unwrap();
        assert_eq!((out.len(), summary.steps), (7, 75));

        // The thinned stream is every 10th state of the unthinned one.
        let mut full: Vec<Vec<usize>> = Vec::new();
        let unthinned = SamplerConfig {
            burn_in: 5,
            samples: 70,
            thinning: 1,
            ..SamplerConfig::default()
        };
        run_chain(&m, &unthinned, 0, &mut full).unwrap();
        let every_tenth: Vec<Vec<usize>> = full.into_iter().skip(9).step_by(10).collect();
        assert_eq!(out, every_tenth);
    }

    #[test]
    fn config_validation() {
        for cfg in [
            SamplerConfig {
                samples: 0,
                ..Default::default()
            },
            SamplerConfig {
                thinning: 0,
                ..Default::default()
            },
            SamplerConfig {
                chains: 0,
                ..Default::default()
            },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn parallel_equals_sequential() {
        let m =
            parse_model("var x 2\nvar y 3\nfeature 0.7 x=1 !y=2\ntable x y 1 2 3 4 5 6\n").unwrap();
        let cfg = SamplerConfig {
            samples: 500,
            chains: 4,
            seed: 9,
            ..SamplerConfig::default()
        };
        let par = run_chains(&m, &cfg, |_| Vec::<Vec<usize>>::new()).unwrap();
        let seq = run_chains_sequential(&m, &cfg, |_| Vec::<Vec<usize>>::new()).unwrap();
        let par: Vec<_> = par.into_iter().map(|(s, _)| s).collect();
        let seq: Vec<_> = seq.into_iter().map(|(s, _)| s).collect();
        assert_eq!(par, seq);
        assert_ne!(par[0], par[1]);
    }
}
