//! Accuracy-versus-effort experiments: KL and MSE of estimated single
//! variable marginals against exact ones, at sample-count checkpoints.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{EstimatorKind, MarginalTable};
use crate::exact::exact_single_marginals;
use crate::group::{variable_orbits, GeneratingSet};
use crate::model::{ground_template, EvidenceSpec, FactorGraph, Template};
use crate::sampler::{gibbs_step, ChainState, SamplerConfig};

/// Estimated probabilities are clamped to `[KL_CLAMP, 1 − KL_CLAMP]`.
pub const KL_CLAMP: f64 = 1e-12;

/// Exact marginals used for experiments larger than the default
/// enumeration limit.
pub const TRUTH_LIMIT: u128 = 1 << 24;

fn check_shapes(truth: &[Vec<f64>], est: &[Vec<f64>]) -> Result<()> {
    if truth.len() != est.len() {
        return Err(Error::SizeMismatch {
            expected: truth.len(),
            found: est.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidConfig("no variables to compare".into()));
    }
    for (t, e) in truth.iter().zip(est) {
        if t.len() != e.len() {
            return Err(Error::SizeMismatch {
                expected: t.len(),
                found: e.len(),
            });
        }
    }
    Ok(())
}

/// Mean over variables of `KL(truth ‖ est)`.
pub fn average_kl(truth: &[Vec<f64>], est: &[Vec<f64>]) -> Result<f64> {
    check_shapes(truth, est)?;
    let total: f64 = truth
        .iter()
        .zip(est)
        .map(|(t, e)| {
            t.iter()
                .zip(e)
                .filter(|(&p, _)| p > 0.0)
                .map(|(&p, &q)| p * (p / q.clamp(KL_CLAMP, 1.0 - KL_CLAMP)).ln())
                .sum::<f64>()
        })
        .sum();
    Ok(total / truth.len() as f64)
}

/// Mean over variables of the mean squared error across values.
pub fn average_mse(truth: &[Vec<f64>], est: &[Vec<f64>]) -> Result<f64> {
    check_shapes(truth, est)?;
    let total: f64 = truth
        .iter()
        .zip(est)
        .map(|(t, e)| t.iter().zip(e).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / t.len() as f64)
        .sum();
    Ok(total / truth.len() as f64)
}

/// Selects the rows of the non-evidence variables.
pub fn free_rows(model: &FactorGraph, all: &[Vec<f64>]) -> Vec<Vec<f64>> {
    model
        .free_variables()
        .iter()
        .map(|&v| all[v].clone())
        .collect()
}

/// `start, start·factor, …` up to and including `max` when reached.
pub fn geometric_checkpoints(start: usize, factor: f64, max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut x = start.max(1) as f64;
    while (x.round() as usize) <= max {
        let c = x.round() as usize;
        if out.last() != Some(&c) {
            out.push(c);
        }
        x *= factor.max(1.0 + 1e-9);
    }
    out
}

#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub model: Arc<FactorGraph>,
    pub group: GeneratingSet,
    /// Exact marginals of every variable.
    pub truth: Vec<Vec<f64>>,
    /// `samples` is ignored; the last checkpoint sets the run length.
    /// Run `r` uses chain stream `r`.
    pub sampler: SamplerConfig,
    pub estimators: Vec<EstimatorKind>,
    pub checkpoints: Vec<usize>,
    pub runs: usize,
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("no estimators".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.checkpoints.is_empty() || self.checkpoints[0] == 0 {
            return Err(Error::InvalidConfig("checkpoints must be positive".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "checkpoints must increase strictly".into(),
            ));
        }
        if self.truth.len() != self.model.num_variables() {
            return Err(Error::SizeMismatch {
                expected: self.model.num_variables(),
                found: self.truth.len(),
            });
        }
        if self.group.degree() != self.model.num_variables() {
            return Err(Error::SizeMismatch {
                expected: self.model.num_variables(),
                found: self.group.degree(),
            });
        }
        if self.sampler.thinning == 0 {
            return Err(Error::InvalidConfig("thinning must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlRow {
    /// `None` for the mean over runs.
    pub run: Option<usize>,
    pub estimator: EstimatorKind,
    pub checkpoint_samples: usize,
    pub wall_seconds: f64,
    pub avg_kl: f64,
    pub avg_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlReport {
    /// Per-run rows, then mean rows; each group ordered by estimator then
    /// checkpoint.
    pub rows: Vec<KlRow>,
    /// Checksum of the sample stream each estimator consumed, per run.
    pub stream_checksums: Vec<Vec<u64>>,
}

impl KlReport {
    pub fn mean_rows(&self) -> impl Iterator<Item = &KlRow> {
        self.rows.iter().filter(|r| r.run.is_none())
    }

    pub fn mean(&self, estimator: EstimatorKind, checkpoint: usize) -> Option<&KlRow> {
        self.mean_rows()
            .find(|r| r.estimator == estimator && r.checkpoint_samples == checkpoint)
    }
}

/// FNV-1a over every value of every sample.
#[derive(Debug, Clone, Copy)]
struct StreamHash(u64);

impl StreamHash {
    const PRIME: u64 = 0x0000_0100_0000_01b3;

    fn new() -> Self {
        StreamHash(0xcbf2_9ce4_8422_2325)
    }

    fn feed(&mut self, s: &[usize]) {
        for &x in s.iter().chain(std::iter::once(&usize::MAX)) {
            self.0 ^= x as u64;
            self.0 = self.0.wrapping_mul(Self::PRIME);
        }
    }

    fn value(&self) -> u64 {
        self.0
    }
}

const BLOCK: usize = 4096;

fn run_once(
    spec: &BenchmarkSpec,
    run: usize,
    truth: &[Vec<f64>],
) -> Result<(Vec<KlRow>, Vec<u64>)> {
    let model = &*spec.model;
    let partition = Arc::new(variable_orbits(&spec.group));
    let mut tables: Vec<MarginalTable> = spec
        .estimators
        .iter()
        .map(|&k| match k {
            EstimatorKind::Standard => Ok(MarginalTable::standard(model)),
            EstimatorKind::RaoBlackwell => MarginalTable::with_partition(model, partition.clone()),
        })
        .collect::<Result<_>>()?;
    let mut hashes = vec![StreamHash::new(); tables.len()];
    let mut est_seconds = vec![0.0; tables.len()];
    let mut sampler_seconds = 0.0;

    let t0 = Instant::now();
    let mut state = ChainState::new(model, spec.sampler.seed, run as u64)?;
    for _ in 0..spec.sampler.burn_in {
        gibbs_step(model, &mut state, spec.sampler.scan)?;
    }
    sampler_seconds += t0.elapsed().as_secs_f64();

    let n = model.num_variables();
    let mut buffer = vec![0usize; BLOCK * n];
    let mut rows = Vec::new();
    let mut taken = 0;
    for &checkpoint in &spec.checkpoints {
        while taken < checkpoint {
            let len = (checkpoint - taken).min(BLOCK);
            let t = Instant::now();
            for chunk in buffer.chunks_mut(n).take(len) {
                for _ in 0..spec.sampler.thinning {
                    gibbs_step(model, &mut state, spec.sampler.scan)?;
                }
                chunk.copy_from_slice(state.current());
            }
            sampler_seconds += t.elapsed().as_secs_f64();
            for ((table, hash), secs) in tables.iter_mut().zip(&mut hashes).zip(&mut est_seconds) {
                let t = Instant::now();
                for s in buffer.chunks(n).take(len) {
                    table.observe(s);
                }
                *secs += t.elapsed().as_secs_f64();
                for s in buffer.chunks(n).take(len) {
                    hash.feed(s);
                }
            }
            taken += len;
        }
        for ((table, &kind), &secs) in tables.iter().zip(&spec.estimators).zip(&est_seconds) {
            let est = free_rows(model, &table.marginals()?);
            rows.push(KlRow {
                run: Some(run),
                estimator: kind,
                checkpoint_samples: checkpoint,
                wall_seconds: sampler_seconds + secs,
                avg_kl: average_kl(truth, &est)?,
                avg_mse: average_mse(truth, &est)?,
            });
        }
    }
    Ok((rows, hashes.iter().map(StreamHash::value).collect()))
}

/// Runs every estimator on the same Gibbs sample stream, `runs` times, and
/// reports KL and MSE at each checkpoint plus the mean over runs.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<KlReport> {
    spec.validate()?;
    let truth = free_rows(&spec.model, &spec.truth);
    let per_run: Vec<(Vec<KlRow>, Vec<u64>)> = (0..spec.runs)
        .into_par_iter()
        .map(|r| run_once(spec, r, &truth))
        .collect::<Result<_>>()?;
    for (r, (_, sums)) in per_run.iter().enumerate() {
        if sums.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Mismatch(format!(
                "estimators saw different streams in run {r}"
            )));
        }
    }
    let mut rows: Vec<KlRow> = Vec::new();
    for (run_rows, _) in &per_run {
        let mut sorted = run_rows.clone();
        sort_rows(&mut sorted, &spec.estimators);
        rows.extend(sorted);
    }
    let mut means = Vec::new();
    for &kind in &spec.estimators {
        for &c in &spec.checkpoints {
            let matching: Vec<&KlRow> = rows
                .iter()
                .filter(|r| r.estimator == kind && r.checkpoint_samples == c)
                .collect();
            let k = matching.len() as f64;
            means.push(KlRow {
                run: None,
                estimator: kind,
                checkpoint_samples: c,
                wall_seconds: matching.iter().map(|r| r.wall_seconds).sum::<f64>() / k,
                avg_kl: matching.iter().map(|r| r.avg_kl).sum::<f64>() / k,
                avg_mse: matching.iter().map(|r| r.avg_mse).sum::<f64>() / k,
            });
        }
    }
    rows.extend(means);
    Ok(KlReport {
        rows,
        stream_checksums: per_run.into_iter().map(|(_, s)| s).collect(),
    })
}

fn sort_rows(rows: &mut [KlRow], order: &[EstimatorKind]) {
    rows.sort_by_key(|r| {
        (
            order
                .iter()
                .position(|&k| k == r.estimator)
                .unwrap_or(usize::MAX),
            r.checkpoint_samples,
        )
    });
}

#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub checkpoints: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub thinning: usize,
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub template: Template,
    pub domain: usize,
    pub estimator: EstimatorKind,
    /// Smallest checkpoint whose mean KL is at most the target, if any.
    pub samples_to_target: Option<usize>,
    pub seconds_to_target: Option<f64>,
}

/// Samples (and seconds) each estimator needs to bring the mean average KL
/// under `target`, for each domain size, with the full renaming group.
pub fn domain_scaling(
    template: Template,
    domains: &[usize],
    target: f64,
    config: &ScalingConfig,
) -> Result<Vec<ScalingRow>> {
    let estimators = [EstimatorKind::Standard, EstimatorKind::RaoBlackwell];
    let mut out = Vec::new();
    for &d in domains {
        let grounded = ground_template(
            template,
            d,
            config.weights.as_deref(),
            &EvidenceSpec::none(),
        )?;
        let group = grounded.renaming_group()?;
        let truth = exact_single_marginals(&grounded.model, TRUTH_LIMIT)?;
        let spec = BenchmarkSpec {
            model: Arc::new(grounded.model),
            group,
            truth,
            sampler: SamplerConfig {
                seed: config.seed,
                thinning: config.thinning,
                ..SamplerConfig::default()
            },
            estimators: estimators.to_vec(),
            checkpoints: config.checkpoints.clone(),
            runs: config.runs,
        };
        let report = run_benchmark(&spec)?;
        for kind in estimators {
            let hit = report
                .mean_rows()
                .filter(|r| r.estimator == kind)
                .find(|r| r.avg_kl <= target);
            out.push(ScalingRow {
                template,
                domain: d,
                estimator: kind,
                samples_to_target: hit.map(|r| r.checkpoint_samples),
                seconds_to_target: hit.map(|r| r.wall_seconds),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactDistribution;
    use crate::model::{make_grid_model, GridMode};

    #[test]
    fn kl_definition() {
        let t = vec![vec![0.3, 0.7]];
        assert_eq!(average_kl(&t, &t).unwrap(), 0.0);
        let e = vec![vec![0.4, 0.6]];
        let expected = 0.3 * (0.3f64 / 0.4).ln() + 0.7 * (0.7f64 / 0.6).ln();
        assert!((average_kl(&t, &e).unwrap() - expected).abs() < 1e-12);
        let clamped = average_kl(&[vec![1.0, 0.0]], &[vec![0.0, 1.0]]).unwrap();
        assert!(clamped.is_finite() && clamped > 20.0);
        assert!(average_kl(&t, &[vec![1.0]]).is_err());
        assert!(average_kl(&t, &[]).is_err());
    }

    #[test]
    fn mse_definition() {
        let t = vec![vec![0.5, 0.5], vec![0.2, 0.8]];
        let e = vec![vec![0.5, 0.5], vec![0.4, 0.6]];
        assert!((average_mse(&t, &e).unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn checkpoint_grid() {
        assert_eq!(
            geometric_checkpoints(100, 10.0, 10_000),
            vec![100, 1000, 10_000]
        );
        assert_eq!(geometric_checkpoints(1, 2.0, 10), vec![1, 2, 4, 8]);
        assert_eq!(geometric_checkpoints(1, 1.5, 4), vec![1, 2, 3]);
    }

    fn spec(model: FactorGraph, group: GeneratingSet, runs: usize) -> BenchmarkSpec {
        let truth = ExactDistribution::compute(&model)
            .unwrap()
            .single_marginals(&model);
        BenchmarkSpec {
            model: Arc::new(model),
            group,
            truth,
            sampler: SamplerConfig {
                seed: 5,
                ..Default::default()
            },
            estimators: vec![EstimatorKind::Standard, EstimatorKind::RaoBlackwell],
            checkpoints: vec![10, 100, 5000],
            runs,
        }
    }

    #[test]
    fn trivial_group_curves_coincide() {
        let m = make_grid_model(2, 2, GridMode::Soft(0.3)).unwrap();
        let report = run_benchmark(&spec(m, GeneratingSet::trivial(4), 3)).unwrap();
        for c in [10, 100, 5000] {
            let a = report.mean(EstimatorKind::Standard, c).unwrap();
            let b = report.mean(EstimatorKind::RaoBlackwell, c).unwrap();
            assert_eq!(a.avg_kl, b.avg_kl);
        }
        assert_eq!(report.rows.len(), 3 * 6 + 6);
        assert!(report.stream_checksums.iter().all(|s| s[0] == s[1]));
    }

    #[test]
    fn benchmark_is_deterministic() {
        let m = make_grid_model(1, 2, GridMode::Soft(0.3)).unwrap();
        let g = crate::model::grid_symmetry_generators(1, 2);
        let a = run_benchmark(&spec(m.clone(), g.clone(), 2)).unwrap();
        let b = run_benchmark(&spec(m, g, 2)).unwrap();
        let strip = |r: &KlReport| {
            r.rows
                .iter()
                .map(|x| (x.avg_kl, x.avg_mse))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.stream_checksums, b.stream_checksums);
    }

    #[test]
    fn single_cell_grid_is_half() {
        let m = make_grid_model(1, 1, GridMode::Soft(0.2)).unwrap();
        let s = spec(m, GeneratingSet::trivial(1), 1);
        assert_eq!(s.truth, vec![vec![0.5, 0.5]]);
        let report = run_benchmark(&s).unwrap();
        let last = report.mean(EstimatorKind::RaoBlackwell, 5000).unwrap();
        assert!(last.avg_mse < 1e-3);
    }

    #[test]
    fn spec_validation() {
        let m = make_grid_model(1, 2, GridMode::Soft(0.3)).unwrap();
        let mut s = spec(m, GeneratingSet::trivial(2), 1);
        s.checkpoints = vec![10, 10];
        assert!(run_benchmark(&s).is_err());
        s.checkpoints = vec![10];
        s.estimators.clear();
        assert!(run_benchmark(&s).is_err());
    }
}
