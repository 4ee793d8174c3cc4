use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use symrb::exact::{
    aggregate, bias_bound_check, build_gibbs_transition_matrix, compare_mixing,
    exact_single_marginals, lumpability_check, orbit_partition, quotient_chain, ExactDistribution,
};
use symrb::experiment::{domain_scaling, run_benchmark, BenchmarkSpec, ScalingConfig, TRUTH_LIMIT};
use symrb::group::{verify_automorphism, VerifyMode};
use symrb::sampler::{read_dump, run_chain, run_chains, DumpWriter, SampleSink};
use symrb::{
    EstimateAccumulator, EstimatorKind, FactorGraph, MarginalQuery, MarginalTable, SamplerConfig,
};

use crate::source::{parse_source, ModelArgs, Source};

pub fn parse_estimators(text: &str) -> Result<Vec<EstimatorKind>> {
    if text == "both" {
        return Ok(vec![EstimatorKind::Standard, EstimatorKind::RaoBlackwell]);
    }
    text.split(',').map(|k| Ok(k.trim().parse()?)).collect()
}

pub fn generate(source: &ModelArgs, seed: u64, out: &Path) -> Result<()> {
    let loaded = source.load(seed)?;
    let model_path = format!("{}.model", out.display());
    let group_path = format!("{}.group", out.display());
    fs::write(&model_path, loaded.model.to_text())
        .with_context(|| format!("cannot write {model_path}"))?;
    fs::write(&group_path, loaded.group.to_text(&loaded.model))
        .with_context(|| format!("cannot write {group_path}"))?;
    println!(
        "{}: {} variables, {} features, {} tables, {} generators -> {model_path}, {group_path}",
        loaded.description,
        loaded.model.num_variables(),
        loaded.model.features().len(),
        loaded.model.tables().len(),
        loaded.group.generators().len()
    );
    Ok(())
}

pub fn sample(source: &ModelArgs, config: &SamplerConfig, out: Box<dyn Write>) -> Result<()> {
    let model = source.load(config.seed)?.model;
    let mut writer = DumpWriter::new(out, &model)?;
    for chain in 0..config.chains {
        run_chain(&model, config, chain, &mut writer)?;
    }
    writer.finish().context("writing samples")?;
    Ok(())
}

struct Accumulators(Vec<EstimateAccumulator>);

impl SampleSink for Accumulators {
    fn observe(&mut self, s: &[usize]) {
        for acc in &mut self.0 {
            acc.observe(s);
        }
    }
}

struct Tables(Vec<MarginalTable>);

impl SampleSink for Tables {
    fn observe(&mut self, s: &[usize]) {
        for t in &mut self.0 {
            t.observe(s);
        }
    }
}

/// Feeds `sink` from a dump file, or from the sampler's chains merged in chain order.
fn feed<S, F>(
    model: &FactorGraph,
    config: &SamplerConfig,
    input: Option<&Path>,
    make: F,
    merge: impl Fn(&mut S, &S) -> Result<()>,
) -> Result<S>
where
    S: SampleSink + Send,
    F: Fn() -> S + Sync,
{
    let mut total = make();
    if let Some(path) = input {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        for s in read_dump(BufReader::new(file), model)
            .with_context(|| format!("in {}", path.display()))?
        {
            total.observe(&s);
        }
        return Ok(total);
    }
    for (part, _) in run_chains(model, config, |_| make())? {
        merge(&mut total, &part)?;
    }
    Ok(total)
}

pub fn estimate(
    source: &ModelArgs,
    config: &SamplerConfig,
    queries: &[String],
    kinds: &[EstimatorKind],
    input: Option<&Path>,
    out: Box<dyn Write>,
) -> Result<()> {
    let loaded = source.load(config.seed)?;
    let model = &loaded.model;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["query", "estimator", "N", "estimate"])?;
    if queries.is_empty() {
        let mut protos = Vec::new();
        for &kind in kinds {
            protos.push(MarginalTable::new(kind, model, &loaded.group)?);
        }
        let tables = feed(
            model,
            config,
            input,
            || Tables(protos.clone()),
            |a, b| {
                for (x, y) in a.0.iter_mut().zip(&b.0) {
                    x.merge(y)?;
                }
                Ok(())
            },
        )?;
        for &v in model.free_variables() {
            for value in 0..model.cardinality(v) {
                for t in &tables.0 {
                    csv.write_record([
                        format!("{}={value}", model.variable(v).name),
                        t.kind().to_string(),
                        t.count().to_string(),
                        t.estimate(v, value)?.to_string(),
                    ])?;
                }
            }
        }
    } else {
        let mut protos = Vec::new();
        for text in queries {
            let query = Arc::new(
                MarginalQuery::parse(model, text).with_context(|| format!("query `{text}`"))?,
            );
            for &kind in kinds {
                protos.push((
                    text.clone(),
                    EstimateAccumulator::new(kind, query.clone(), &loaded.group)?,
                ));
            }
        }
        let accs: Vec<EstimateAccumulator> = protos.iter().map(|(_, a)| a.clone()).collect();
        let total = feed(
            model,
            config,
            input,
            || Accumulators(accs.clone()),
            |a, b| {
                for (x, y) in a.0.iter_mut().zip(&b.0) {
                    x.merge(y)?;
                }
                Ok(())
            },
        )?;
        for ((text, _), acc) in protos.iter().zip(&total.0) {
            csv.write_record([
                text.clone(),
                acc.kind().to_string(),
                acc.count().to_string(),
                acc.estimate()?.to_string(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn exact(source: &ModelArgs, queries: &[String], seed: u64, out: Box<dyn Write>) -> Result<()> {
    let model = source.load(seed)?.model;
    let mut csv = csv::Writer::from_writer(out);
    if queries.is_empty() {
        let marginals = exact_single_marginals(&model, TRUTH_LIMIT)?;
        csv.write_record(["variable", "value", "probability"])?;
        for (v, row) in marginals.iter().enumerate() {
            for (value, p) in row.iter().enumerate() {
                csv.write_record([
                    model.variable(v).name.clone(),
                    value.to_string(),
                    p.to_string(),
                ])?;
            }
        }
    } else {
        let dist = ExactDistribution::compute_with_limit(&model, TRUTH_LIMIT)?;
        csv.write_record(["query", "probability"])?;
        for text in queries {
            let q =
                MarginalQuery::parse(&model, text).with_context(|| format!("query `{text}`"))?;
            csv.write_record([text.clone(), dist.marginal(&q).to_string()])?;
        }
    }
    csv.flush()?;
    Ok(())
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let path = dir.join(name);
    let mut csv = csv::Writer::from_path(&path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    csv.write_record(header)?;
    for row in rows {
        csv.write_record(row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn analyze(
    source: &ModelArgs,
    queries: &[String],
    epsilons: &[f64],
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let loaded = source.load(seed)?;
    let (model, group) = (&loaded.model, &loaded.group);
    for (i, g) in group.generators().iter().enumerate() {
        let verdict = verify_automorphism(model, g, VerifyMode::Exhaustive)?;
        if !verdict.holds {
            bail!(
                "generator {} is not an automorphism: {}",
                i + 1,
                verdict.reason.unwrap_or_default()
            );
        }
    }
    let chain = build_gibbs_transition_matrix(model)?;
    let partition = chain.restrict_partition(&orbit_partition(group, model)?)?;
    let pi = chain.stationary();
    let verdict = lumpability_check(chain.matrix(), &partition, pi)?;
    let quotient = quotient_chain(chain.matrix(), &partition)?;
    let pi_q = aggregate(pi, &partition);
    let balance = quotient.detailed_balance_residual(&pi_q)?;
    let mixing = compare_mixing(chain.matrix(), &partition, pi, epsilons)?;

    println!("model: {}", loaded.description);
    println!(
        "variables: {} ({} free), supported states: {}, generators: {}",
        model.num_variables(),
        model.free_variables().len(),
        chain.num_states(),
        group.generators().len()
    );
    let sizes = partition.sizes();
    println!(
        "orbits: {} (sizes {}..{})",
        partition.num_blocks(),
        sizes.iter().min().unwrap_or(&0),
        sizes.iter().max().unwrap_or(&0)
    );
    println!(
        "lumpability: ordinary {} (residual {:.3e}), exact {} (residual {:.3e})",
        verdict.ordinary, verdict.ordinary_residual, verdict.exact, verdict.exact_residual
    );
    println!(
        "quotient: {} states, row-sum residual {:.3e}, detailed-balance residual {:.3e}",
        quotient.dim(),
        quotient.row_sum_residual(),
        balance
    );
    println!("mixing times:");
    println!("  {:>8} {:>8} {:>8}", "epsilon", "tau", "tau'");
    for r in &mixing {
        println!("  {:>8} {:>8} {:>8}", r.epsilon, r.tau, r.tau_quotient);
    }

    let mut bias_rows = Vec::new();
    if !queries.is_empty() {
        println!("bias of the single-sample orbit estimator after tau'(epsilon) steps:");
        println!(
            "  {:<24} {:>8} {:>6} {:>12} {:>12}",
            "query", "epsilon", "T", "theta", "|bias|"
        );
    }
    for text in queries {
        let q = MarginalQuery::parse(model, text).with_context(|| format!("query `{text}`"))?;
        for &eps in epsilons {
            let b = bias_bound_check(model, group, &q, eps, None)?;
            println!(
                "  {:<24} {:>8} {:>6} {:>12.6} {:>12.3e}{}",
                text,
                eps,
                b.t,
                b.theta,
                b.bias,
                if b.within_bound {
                    ""
                } else {
                    "  EXCEEDS BOUND"
                }
            );
            bias_rows.push(vec![
                text.clone(),
                eps.to_string(),
                b.t.to_string(),
                b.theta.to_string(),
                b.bias.to_string(),
                b.within_bound.to_string(),
            ]);
        }
    }

    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let space = chain.space();
        let orbit_rows: Vec<Vec<String>> = (0..partition.num_blocks())
            .map(|b| {
                let rep = space.decode(chain.rank_of(partition.representatives()[b]));
                let rep: Vec<String> = rep.iter().map(usize::to_string).collect();
                vec![
                    b.to_string(),
                    sizes[b].to_string(),
                    pi_q[b].to_string(),
                    rep.join(" "),
                ]
            })
            .collect();
        write_csv(
            dir,
            "orbits.csv",
            &["orbit", "size", "probability", "representative"],
            &orbit_rows,
        )?;
        write_csv(
            dir,
            "lumpability.csv",
            &[
                "ordinary",
                "exact",
                "ordinary_residual",
                "exact_residual",
                "quotient_balance_residual",
            ],
            &[vec![
                verdict.ordinary.to_string(),
                verdict.exact.to_string(),
                verdict.ordinary_residual.to_string(),
                verdict.exact_residual.to_string(),
                balance.to_string(),
            ]],
        )?;
        let mixing_rows: Vec<Vec<String>> = mixing
            .iter()
            .map(|r| {
                vec![
                    r.epsilon.to_string(),
                    r.tau.to_string(),
                    r.tau_quotient.to_string(),
                ]
            })
            .collect();
        write_csv(
            dir,
            "mixing.csv",
            &["epsilon", "tau", "tau_quotient"],
            &mixing_rows,
        )?;
        write_csv(
            dir,
            "bias.csv",
            &["query", "epsilon", "t", "theta", "bias", "within_bound"],
            &bias_rows,
        )?;
    }
    Ok(())
}

/// Reads `variable,value,probability` rows into per-variable marginals.
fn read_truth(path: &Path, model: &FactorGraph) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; model.num_variables()];
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let at = || format!("{} row {}", path.display(), line + 2);
        if record.len() != 3 {
            bail!("{}: expected variable,value,probability", at());
        }
        let v = model.variable_id(&record[0]).with_context(at)?;
        let value: usize = record[1].parse().with_context(at)?;
        let p: f64 = record[2].parse().with_context(at)?;
        if value >= model.cardinality(v) {
            bail!("{}: value {value} out of range", at());
        }
        rows[v].get_or_insert_with(|| vec![0.0; model.cardinality(v)])[value] = p;
    }
    rows.into_iter()
        .enumerate()
        .map(|(v, r)| {
            r.with_context(|| format!("no reference marginal for {}", model.variable(v).name))
        })
        .collect()
}

pub fn bench(
    source: &ModelArgs,
    config: &SamplerConfig,
    kinds: &[EstimatorKind],
    checkpoints: &[usize],
    runs: usize,
    truth: Option<&Path>,
    out: Box<dyn Write>,
) -> Result<()> {
    let loaded = source.load(config.seed)?;
    let truth = match truth {
        Some(path) => read_truth(path, &loaded.model)?,
        None => exact_single_marginals(&loaded.model, TRUTH_LIMIT)?,
    };
    let spec = BenchmarkSpec {
        model: Arc::new(loaded.model),
        group: loaded.group,
        truth,
        sampler: config.clone(),
        estimators: kinds.to_vec(),
        checkpoints: checkpoints.to_vec(),
        runs,
    };
    let report = run_benchmark(&spec)?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record([
        "run",
        "estimator",
        "checkpoint_samples",
        "wall_seconds",
        "avg_kl",
        "avg_mse",
    ])?;
    for r in &report.rows {
        csv.write_record([
            r.run.map_or_else(|| "mean".to_string(), |i| i.to_string()),
            r.estimator.to_string(),
            r.checkpoint_samples.to_string(),
            format!("{:.6}", r.wall_seconds),
            r.avg_kl.to_string(),
            r.avg_mse.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn scaling(
    source: &ModelArgs,
    config: &SamplerConfig,
    checkpoints: &[usize],
    runs: usize,
    domains: &[usize],
    target: f64,
    out: Box<dyn Write>,
) -> Result<()> {
    let Some(name) = &source.template else {
        bail!("a scaling table needs --template");
    };
    let Source::Template(template) = parse_source(name)? else {
        bail!("scaling tables are defined for relational templates only");
    };
    let domains = if domains.is_empty() {
        vec![source.domain]
    } else {
        domains.to_vec()
    };
    let scaling = ScalingConfig {
        checkpoints: checkpoints.to_vec(),
        runs,
        seed: config.seed,
        thinning: config.thinning,
        weights: source.weights.clone(),
    };
    let rows = domain_scaling(template, &domains, target, &scaling)?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record([
        "template",
        "domain",
        "estimator",
        "samples_to_target",
        "seconds_to_target",
    ])?;
    let unreached = || "unreached".to_string();
    for r in rows {
        csv.write_record([
            r.template.to_string(),
            r.domain.to_string(),
            r.estimator.to_string(),
            r.samples_to_target
                .map_or_else(unreached, |n| n.to_string()),
            r.seconds_to_target
                .map_or_else(unreached, |s| format!("{s:.6}")),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
