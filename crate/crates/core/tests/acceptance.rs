//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a subset.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use symrb::estimator::{EstimateAccumulator, MarginalTable};
use symrb::exact::{
    aggregate, bias_bound_check, build_gibbs_transition_matrix, compare_mixing,
    exact_single_marginals, lumpability_check, mixture_residual, orbit_partition, quotient_chain,
    ExactDistribution, StateSpace, LUMP_TOL,
};
use symrb::experiment::{domain_scaling, run_benchmark, BenchmarkSpec, ScalingConfig, TRUTH_LIMIT};
use symrb::group::{
    orbit_hamming_weight, orbit_of_sequence, verify_automorphism, GeneratingSet, VerifyMode,
};
use symrb::model::{
    grid_symmetry_generators, ground_template, make_grid_model, EvidenceSpec, FactorGraph,
    GridMode, MarginalQuery, Predicate, Template,
};
use symrb::sampler::{gibbs_step, ChainState, SamplerConfig, ScanOrder};
use symrb::synth::{
    exchangeable_model, random_symmetric_instance, smokes_cancer_pair, SymmetricInstance,
    SynthOptions,
};
use symrb::EstimatorKind;

type Check = fn() -> Result<String, String>;

fn fail<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1
fn example_sample() -> Result<String, String> {
    let (model, group) = smokes_cancer_pair().map_err(fail)?;
    let q = Arc::new(MarginalQuery::parse(&model, "smokes(A)=1").map_err(fail)?);
    let orbit = orbit_of_sequence(&group, q.vars()).map_err(fail)?;
    let s = [1, 0, 1, 0];
    let h = orbit_hamming_weight(&s, &q, &orbit);
    let mut acc = EstimateAccumulator::rao_blackwell(q, Arc::new(orbit)).map_err(fail)?;
    acc.observe(&s);
    let contribution = acc.estimate().map_err(fail)?;
    ensure(h == 1 && contribution == 0.5, || {
        format!("H={h}, contribution={contribution}")
    })?;
    Ok(format!("H={h}, contribution={contribution}"))
}

// 2
fn four_atom_orbits() -> Result<String, String> {
    let (model, group) = smokes_cancer_pair().map_err(fail)?;
    let p = orbit_partition(&group, &model).map_err(fail)?;
    ensure(p.num_blocks() == 10 && p.len() == 16, || {
        format!("{} orbits of {} states", p.num_blocks(), p.len())
    })?;
    Ok(format!("{} orbits of {} states", p.num_blocks(), p.len()))
}

fn random_instances(count: usize, seed: u64, opts: &SynthOptions) -> Vec<SymmetricInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        if let Ok(inst) = random_symmetric_instance(&mut rng, opts) {
            out.push(inst);
        }
    }
    out
}

fn identity_instances() -> Vec<SymmetricInstance> {
    let mut instances = random_instances(40, 11, &SynthOptions::default());
    instances.extend(random_instances(
        20,
        12,
        &SynthOptions {
            hard_prob: 0.15,
            max_query: 3,
            ..SynthOptions::default()
        },
    ));
    instances
}

// 3
fn orbit_average_identity() -> Result<String, String> {
    let instances = identity_instances();
    let mut states = 0usize;
    for (k, inst) in instances.iter().enumerate() {
        let space = StateSpace::new(&inst.model).map_err(fail)?;
        let partition = orbit_partition(&inst.group, &inst.model).map_err(fail)?;
        let orbit = orbit_of_sequence(&inst.group, inst.query.vars()).map_err(fail)?;
        let mut hits = vec![0usize; partition.num_blocks()];
        space.for_each(|rank, s| {
            if inst.query.matches(s) {
                hits[partition.label(rank)] += 1;
            }
        });
        let mut bad = None;
        space.for_each(|rank, s| {
            let block = partition.label(rank);
            let h = orbit_hamming_weight(s, &inst.query, &orbit);
            // H / |orbit| == hits / |assignment orbit|, cross-multiplied.
            if h * partition.sizes()[block] != hits[block] * orbit.len() && bad.is_none() {
                bad = Some(rank);
            }
        });
        if let Some(rank) = bad {
            return Err(format!("instance {k}: mismatch at rank {rank}"));
        }
        states += space.size();
    }
    Ok(format!(
        "{} triples, {states} assignments agree exactly",
        instances.len()
    ))
}

// 7, on the triples of criterion 3
fn mixture_only() -> Result<String, String> {
    let instances = identity_instances();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for inst in &instances {
        let dist = match ExactDistribution::compute(&inst.model) {
            Ok(d) => d,
            Err(symrb::Error::NoSupportedState) => continue,
            Err(e) => return Err(fail(e)),
        };
        let partition = orbit_partition(&inst.group, &inst.model).map_err(fail)?;
        worst = worst.max(mixture_residual(&dist, &partition, &inst.query).map_err(fail)?);
        checked += 1;
    }
    ensure(worst <= 1e-12, || format!("max residual {worst:e}"))?;
    Ok(format!("{checked} triples, max residual {worst:.1e}"))
}

// 4
fn mse_dominance() -> Result<String, String> {
    let grounded =
        ground_template(Template::Smokers, 4, None, &EvidenceSpec::none()).map_err(fail)?;
    let model = &grounded.model;
    let group = grounded.renaming_group().map_err(fail)?;
    let dist = ExactDistribution::compute_with_limit(model, TRUTH_LIMIT).map_err(fail)?;
    let truth = dist.single_marginals(model);
    let sampler = dist.into_sampler();
    let (reps, n) = (2000, 50);
    let nv = model.num_variables();
    let mut se_std = vec![0.0; nv];
    let mut se_rb = vec![0.0; nv];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut s = vec![0; nv];
    for _ in 0..reps {
        let mut std = MarginalTable::standard(model);
        let mut rb = MarginalTable::rao_blackwell(model, &group).map_err(fail)?;
        for _ in 0..n {
            sampler.sample_into(&mut rng, &mut s);
            std.observe(&s);
            rb.observe(&s);
        }
        for v in 0..nv {
            let t = truth[v][1];
            se_std[v] += (std.estimate(v, 1).map_err(fail)? - t).powi(2);
            se_rb[v] += (rb.estimate(v, 1).map_err(fail)? - t).powi(2);
        }
    }
    let mut worst_ratio: f64 = 0.0;
    let mut worst_var = 0;
    for v in 0..nv {
        let ratio = se_rb[v] / se_std[v];
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_var = v;
        }
    }
    let name = &model.variable(worst_var).name;
    ensure(worst_ratio <= 0.5, || {
        format!("MSE ratio {worst_ratio:.3} on {name}=1")
    })?;
    Ok(format!(
        "{nv} queries, worst MSE(rb)/MSE(standard) = {worst_ratio:.3} ({name}=1)"
    ))
}

fn friends_evidence(d: usize) -> EvidenceSpec {
    let mut ev = EvidenceSpec::none();
    for x in 0..d {
        for y in 0..d {
            ev.push(Predicate::Friends, vec![x, y], x != y);
        }
    }
    ev
}

fn lumping_models() -> Result<Vec<(String, FactorGraph, GeneratingSet)>, String> {
    let mut out = Vec::new();
    let (m, g) = smokes_cancer_pair().map_err(fail)?;
    out.push(("smokes-cancer d=2".to_string(), m, g));
    let gm = ground_template(Template::Smokers, 2, None, &EvidenceSpec::none()).map_err(fail)?;
    let g = gm.renaming_group().map_err(fail)?;
    out.push(("smokers d=2".into(), gm.model, g));
    for d in [3, 4] {
        let gm = ground_template(Template::Smokers, d, None, &friends_evidence(d)).map_err(fail)?;
        let g = gm.renaming_group().map_err(fail)?;
        out.push((format!("smokers d={d} (friends observed)"), gm.model, g));
    }
    for (r, c) in [(2, 2), (2, 3), (3, 3)] {
        let m = make_grid_model(r, c, GridMode::Soft(0.5)).map_err(fail)?;
        out.push((format!("grid {r}x{c}"), m, grid_symmetry_generators(r, c)));
    }
    let (m, g) = exchangeable_model(4, 0.4, -0.7).map_err(fail)?;
    out.push(("exchangeable n=4".into(), m, g));
    // Keep per-start mixing-time propagation quick: at most 4096 states each.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut k = 0;
    while k < 12 {
        let Ok(inst) = random_symmetric_instance(&mut rng, &SynthOptions::default()) else {
            continue;
        };
        if StateSpace::new(&inst.model).map_or(true, |s| s.size() > 4096) {
            continue;
        }
        out.push((format!("random #{k}"), inst.model, inst.group));
        k += 1;
    }
    Ok(out)
}

// 5
fn exact_lumpability() -> Result<String, String> {
    let eps = [0.25, 0.1, 0.01];
    let models = lumping_models()?;
    let mut strict = 0;
    for (name, model, group) in &models {
        for g in group.generators() {
            let v = verify_automorphism(model, g, VerifyMode::Exhaustive).map_err(fail)?;
            ensure(v.holds, || {
                format!("{name}: generator is not an automorphism")
            })?;
        }
        let chain = build_gibbs_transition_matrix(model).map_err(|e| format!("{name}: {e}"))?;
        let partition = chain
            .restrict_partition(&orbit_partition(group, model).map_err(fail)?)
            .map_err(fail)?;
        let pi = chain.stationary();
        let verdict = lumpability_check(chain.matrix(), &partition, pi).map_err(fail)?;
        ensure(verdict.ordinary && verdict.exact, || {
            format!("{name}: {verdict:?}")
        })?;
        let quotient = quotient_chain(chain.matrix(), &partition).map_err(fail)?;
        let row = quotient.row_sum_residual();
        ensure(row <= 1e-12, || {
            format!("{name}: quotient row sums off by {row:e}")
        })?;
        let pi_q = aggregate(pi, &partition);
        let db = quotient.detailed_balance_residual(&pi_q).map_err(fail)?;
        ensure(db <= LUMP_TOL, || {
            format!("{name}: quotient detailed balance {db:e}")
        })?;
        let rows = compare_mixing(chain.matrix(), &partition, pi, &eps)
            .map_err(|e| format!("{name}: {e}"))?;
        strict += rows.iter().filter(|r| r.tau_quotient < r.tau).count();
    }
    Ok(format!(
        "{} models lumpable, quotient balanced, tau' <= tau everywhere ({strict} strict)",
        models.len()
    ))
}

// 6
fn bias_bound() -> Result<String, String> {
    let mut worst = (0.0f64, 0.0f64);
    let (m1, g1) = smokes_cancer_pair().map_err(fail)?;
    let q1 = MarginalQuery::parse(&m1, "smokes(A)=1").map_err(fail)?;
    let (m2, g2) = exchangeable_model(4, 0.4, -0.7).map_err(fail)?;
    let q2 = MarginalQuery::parse(&m2, "x0=1").map_err(fail)?;
    let mut lines = Vec::new();
    for (name, m, g, q) in [
        ("smokes-cancer", &m1, &g1, &q1),
        ("exchangeable", &m2, &g2, &q2),
    ] {
        for eps in [0.2, 0.1, 0.05] {
            let r = bias_bound_check(m, g, q, eps, None).map_err(fail)?;
            ensure(r.bias <= eps, || {
                format!("{name} eps={eps}: bias {} at T={}", r.bias, r.t)
            })?;
            if r.bias / eps > worst.0 / worst.1.max(1e-300) {
                worst = (r.bias, eps);
            }
            lines.push(format!("{name}@{eps}:T={}", r.t));
        }
    }
    Ok(format!(
        "all within bound; tightest |bias|={:.4} at eps={} [{}]",
        worst.0,
        worst.1,
        lines.join(" ")
    ))
}

// 8
fn kl_curves() -> Result<String, String> {
    let grounded =
        ground_template(Template::Smokers, 6, None, &EvidenceSpec::none()).map_err(fail)?;
    let group = grounded.renaming_group().map_err(fail)?;
    let truth = exact_single_marginals(&grounded.model, TRUTH_LIMIT).map_err(fail)?;
    let checkpoints = vec![100, 1000, 10_000];
    let spec = BenchmarkSpec {
        model: Arc::new(grounded.model),
        group,
        truth,
        sampler: SamplerConfig {
            seed: 8,
            ..SamplerConfig::default()
        },
        estimators: vec![EstimatorKind::Standard, EstimatorKind::RaoBlackwell],
        checkpoints: checkpoints.clone(),
        runs: 10,
    };
    let report = run_benchmark(&spec).map_err(fail)?;
    let mut parts = Vec::new();
    for &c in &checkpoints {
        let std = report.mean(EstimatorKind::Standard, c).unwrap().avg_kl;
        let rb = report.mean(EstimatorKind::RaoBlackwell, c).unwrap().avg_kl;
        ensure(rb <= std, || {
            format!("N={c}: rb {rb:.3e} > standard {std:.3e}")
        })?;
        if c == 10_000 {
            ensure(rb <= 0.1 * std, || {
                format!("N={c}: rb/standard = {:.3}", rb / std)
            })?;
        }
        parts.push(format!("N={c}: {:.3}", rb / std));
    }
    Ok(format!("KL ratio rb/standard {}", parts.join(", ")))
}

// 9
fn domain_scaling_check() -> Result<String, String> {
    let config = ScalingConfig {
        checkpoints: symrb::experiment::geometric_checkpoints(100, 2.0, 1 << 21),
        runs: 10,
        seed: 9,
        thinning: 1,
        weights: None,
    };
    let domains = [2, 3, 4];
    let plain = domain_scaling(Template::Smokers, &domains, 1e-3, &config).map_err(fail)?;
    let trans =
        domain_scaling(Template::SmokersTransitivity, &domains, 1e-3, &config).map_err(fail)?;
    let get = |rows: &[symrb::experiment::ScalingRow], d: usize, k: EstimatorKind| {
        rows.iter()
            .find(|r| r.domain == d && r.estimator == k)
            .and_then(|r| r.samples_to_target)
    };
    let mut parts = Vec::new();
    for &d in &domains {
        for (name, rows) in [("smokers", &plain), ("transitivity", &trans)] {
            let std = get(rows, d, EstimatorKind::Standard);
            let rb = get(rows, d, EstimatorKind::RaoBlackwell)
                .ok_or_else(|| format!("{name} d={d}: rb never reached target"))?;
            if let Some(std) = std {
                ensure(rb <= std, || {
                    format!("{name} d={d}: rb {rb} > standard {std}")
                })?;
            }
            parts.push(format!(
                "{name} d={d}: rb {rb} / std {}",
                std.map_or("unreached".into(), |s| s.to_string())
            ));
        }
        let a = get(&plain, d, EstimatorKind::RaoBlackwell).unwrap() as f64;
        let b = get(&trans, d, EstimatorKind::RaoBlackwell).unwrap() as f64;
        ensure(a.max(b) <= 2.0 * a.min(b), || {
            format!("d={d}: rb {a} vs {b} with transitivity")
        })?;
    }
    Ok(parts.join("; "))
}

// 10
fn complexity_contract() -> Result<String, String> {
    let grounded =
        ground_template(Template::Smokers, 50, None, &EvidenceSpec::none()).map_err(fail)?;
    let model = &grounded.model;
    let group = grounded.renaming_group().map_err(fail)?;
    let r = group.generators().len();
    let mut notes = Vec::new();
    for text in [
        "smokes(P0)=1",
        "friends(P0,P1)=1",
        "smokes(P0)=1,friends(P0,P1)=0",
    ] {
        let q = Arc::new(MarginalQuery::parse(model, text).map_err(fail)?);
        let orbit = Arc::new(orbit_of_sequence(&group, q.vars()).map_err(fail)?);
        let apps = orbit.generator_applications();
        ensure(apps <= r * orbit.len(), || {
            format!("{text}: {apps} applications")
        })?;
        let mut acc = EstimateAccumulator::rao_blackwell(q, orbit.clone()).map_err(fail)?;
        let s = model.evidence_assignment();
        for _ in 0..100 {
            acc.observe(&s);
        }
        let per_sample = acc.indicator_evaluations() / acc.count();
        ensure(per_sample <= orbit.len() as u64, || {
            format!("{text}: {per_sample} evaluations per sample")
        })?;
        notes.push(format!("|orbit|={} apps={apps}", orbit.len()));
    }

    let mut state = ChainState::new(model, 10, 0).map_err(fail)?;
    let mut std = MarginalTable::standard(model);
    let mut rb = MarginalTable::rao_blackwell(model, &group).map_err(fail)?;
    let (mut t_std, mut t_rb) = (Duration::ZERO, Duration::ZERO);
    for _ in 0..10_000 {
        gibbs_step(model, &mut state, ScanOrder::Random).map_err(fail)?;
        let t = Instant::now();
        std.observe(state.current());
        t_std += t.elapsed();
        let t = Instant::now();
        rb.observe(state.current());
        t_rb += t.elapsed();
    }
    let ratio = t_rb.as_secs_f64() / t_std.as_secs_f64();
    ensure(ratio <= 3.0, || {
        format!("batch rb/standard time ratio {ratio:.2}")
    })?;
    Ok(format!(
        "{}; batch time ratio rb/standard {ratio:.2}",
        notes.join(", ")
    ))
}

fn main() {
    let checks: [(u32, &str, Duration, Check); 10] = [
        (
            1,
            "single-sample orbit average",
            Duration::from_millis(1),
            example_sample,
        ),
        (
            2,
            "four-atom orbit count",
            Duration::from_millis(1),
            four_atom_orbits,
        ),
        (
            3,
            "closed-form orbit average",
            Duration::from_secs(30),
            orbit_average_identity,
        ),
        (
            4,
            "MSE dominance under iid sampling",
            Duration::from_secs(60),
            mse_dominance,
        ),
        (
            5,
            "exact lumpability and quotient mixing",
            Duration::from_secs(120),
            exact_lumpability,
        ),
        (
            6,
            "bias bound at quotient mixing time",
            Duration::from_secs(60),
            bias_bound,
        ),
        (
            7,
            "mixture reparameterization",
            Duration::from_secs(30),
            mixture_only,
        ),
        (
            8,
            "KL curves smokers d=6",
            Duration::from_secs(300),
            kl_curves,
        ),
        (
            9,
            "domain scaling",
            Duration::from_secs(600),
            domain_scaling_check,
        ),
        (
            10,
            "complexity contract",
            Duration::from_secs(300),
            complexity_contract,
        ),
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failures = 0;
    for (id, name, limit, check) in checks {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= limit => (true, d),
            Ok(d) => (false, format!("{d}; over time limit {limit:?}")),
            Err(e) => (false, e),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "{} criterion {id:>2} {name} [{:.3?}]: {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
