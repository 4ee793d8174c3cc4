//! Small models with known automorphism groups, for tests and benchmarks.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::exact::{group_closure, ExactDistribution};
use crate::group::{variable_orbits, verify_automorphism, GeneratingSet, Permutation, VerifyMode};
use crate::model::{
    ground_template, EvidenceSpec, FactorGraph, Literal, MarginalQuery, ModelBuilder, Template,
};

/// Group elements enumerated while symmetrizing a random model.
pub const SYNTH_GROUP_CAP: usize = 10_000;

/// A model together with a verified automorphism group and a query.
#[derive(Debug, Clone)]
pub struct SymmetricInstance {
    pub model: FactorGraph,
    pub group: GeneratingSet,
    pub query: MarginalQuery,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub min_vars: usize,
    pub max_vars: usize,
    /// Chance that a variable orbit has three values instead of two.
    pub ternary_prob: f64,
    /// Chance that a table entry is a hard zero.
    pub hard_prob: f64,
    /// Chance that one variable orbit is observed.
    pub evidence_prob: f64,
    /// Largest query length.
    pub max_query: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            min_vars: 3,
            max_vars: 10,
            ternary_prob: 0.15,
            hard_prob: 0.0,
            evidence_prob: 0.25,
            max_query: 2,
        }
    }
}

fn random_generators<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Permutation> {
    let mut ids: Vec<usize> = (0..n).collect();
    let mut gens = Vec::new();
    let count = rng.gen_range(1..=2);
    for _ in 0..count {
        ids.shuffle(rng);
        let g = match rng.gen_range(0..3) {
            // Product of disjoint transpositions.
            0 => {
                let pairs = rng.gen_range(1..=(n / 2).max(1));
                let cycles: Vec<Vec<usize>> = ids
                    .chunks(2)
                    .take(pairs)
                    .filter(|c| c.len() == 2)
                    .map(<[usize]>::to_vec)
                    .collect();
                Permutation::from_cycles(n, &cycles)
            }
            // One longer cycle.
            1 => {
                let k = rng.gen_range(2..=n.min(5));
                Permutation::from_cycles(n, &[ids[..k].to_vec()])
            }
            // Two parallel cycles, as when renaming constants moves several atoms at once.
            _ => {
                let k = rng.gen_range(2..=(n / 2).clamp(2, 4));
                if 2 * k > n {
                    Permutation::from_cycles(n, &[ids[..k.min(n)].to_vec()])
                } else {
                    Permutation::from_cycles(n, &[ids[..k].to_vec(), ids[k..2 * k].to_vec()])
                }
            }
        };
        gens.push(g.expect("disjoint cycles"));
    }
    gens.retain(|g| !g.is_identity());
    gens
}

/// A random model on at most `opts.max_vars` variables whose factor set is
/// closed under a random permutation group, plus a random query. Every
/// generator is verified exhaustively before returning.
pub fn random_symmetric_instance<R: Rng + ?Sized>(
    rng: &mut R,
    opts: &SynthOptions,
) -> Result<SymmetricInstance> {
    if opts.min_vars < 2 || opts.min_vars > opts.max_vars {
        return Err(Error::InvalidConfig(
            "need 2 <= min_vars <= max_vars".into(),
        ));
    }
    let n = rng.gen_range(opts.min_vars..=opts.max_vars);
    let group = GeneratingSet::new(n, random_generators(rng, n))?;
    let elements = group_closure(&group, SYNTH_GROUP_CAP)?;
    let partition = variable_orbits(&group);

    let mut card = vec![2; n];
    for block in partition.blocks() {
        let c = if rng.gen_bool(opts.ternary_prob) {
            3
        } else {
            2
        };
        for &v in block {
            card[v] = c;
        }
    }
    let mut b = ModelBuilder::new();
    for (v, &c) in card.iter().enumerate() {
        b.add_variable(format!("x{v}"), c)?;
    }

    let mut seen_clauses: HashSet<Vec<(usize, usize, bool)>> = HashSet::new();
    for _ in 0..rng.gen_range(1..=n) {
        let len = rng.gen_range(1..=3.min(n));
        let vars: Vec<usize> = (0..n)
            .collect::<Vec<_>>()
            .choose_multiple(rng, len)
            .copied()
            .collect();
        let lits: Vec<(usize, usize, bool)> = vars
            .iter()
            .map(|&v| (v, rng.gen_range(0..card[v]), rng.gen_bool(0.5)))
            .collect();
        let weight = rng.gen_range(-1.5..1.5);
        let images: Vec<Vec<(usize, usize, bool)>> = elements
            .iter()
            .map(|g| lits.iter().map(|&(v, a, p)| (g.apply(v), a, p)).collect())
            .filter(|image: &Vec<_>| seen_clauses.insert(image.clone()))
            .collect();
        // Damp large orbits so the model stays far from deterministic.
        let scale = 1.0 / (images.len().max(1) as f64).sqrt();
        for image in images {
            let literals = image
                .iter()
                .map(|&(v, a, p)| Literal::new(v, a, p))
                .collect();
            b.add_feature(weight * scale, literals)?;
        }
    }

    let mut seen_tables: HashSet<Vec<usize>> = HashSet::new();
    for _ in 0..rng.gen_range(0..=n / 2 + 1) {
        let arity = rng.gen_range(1..=2);
        let scope: Vec<usize> = (0..n)
            .collect::<Vec<_>>()
            .choose_multiple(rng, arity)
            .copied()
            .collect();
        let size: usize = scope.iter().map(|&v| card[v]).product();
        let mut potentials: Vec<f64> = (0..size)
            .map(|_| {
                if rng.gen_bool(opts.hard_prob) {
                    0.0
                } else {
                    rng.gen_range(0.2..3.0)
                }
            })
            .collect();
        if potentials.iter().all(|&p| p == 0.0) {
            potentials[0] = 1.0;
        }
        let images: Vec<Vec<usize>> = elements
            .iter()
            .map(|g| scope.iter().map(|&v| g.apply(v)).collect())
            .filter(|image: &Vec<usize>| seen_tables.insert(image.clone()))
            .collect();
        let exponent = 1.0 / (images.len().max(1) as f64).sqrt();
        let damped: Vec<f64> = potentials.iter().map(|p| p.powf(exponent)).collect();
        for image in images {
            b.add_table(image, damped.clone())?;
        }
    }

    let mut evidence_block = None;
    if rng.gen_bool(opts.evidence_prob) && partition.blocks().len() > 1 {
        let k = rng.gen_range(0..partition.blocks().len());
        let value = rng.gen_range(0..card[partition.blocks()[k][0]]);
        for &v in &partition.blocks()[k] {
            b.set_evidence(v, value)?;
        }
        evidence_block = Some(k);
    }
    let model = b.build()?;
    if model.free_variables().is_empty() {
        return Err(Error::InvalidModel("no free variables".into()));
    }
    ExactDistribution::compute(&model)?;
    for g in group.generators() {
        let verdict = verify_automorphism(&model, g, VerifyMode::Exhaustive)?;
        if !verdict.holds {
            return Err(Error::Mismatch(format!(
                "symmetrized model is not invariant: {:?}",
                verdict.reason
            )));
        }
    }

    let free: Vec<usize> = (0..n)
        .filter(|&v| Some(partition.block_of(v)) != evidence_block)
        .collect();
    let len = rng.gen_range(1..=opts.max_query.min(free.len()).max(1));
    let vars: Vec<usize> = free.choose_multiple(rng, len).copied().collect();
    let target = vars.iter().map(|&v| rng.gen_range(0..card[v])).collect();
    let query = MarginalQuery::new(&model, vars, target)?;
    Ok(SymmetricInstance {
        model,
        group,
        query,
    })
}

/// `n` exchangeable binary variables: a unary clause `x_i = 1` on each and
/// a pairwise clause `x_i = 1 ∨ x_j = 1` on each pair, with the full
/// symmetric group generated by adjacent transpositions.
pub fn exchangeable_model(
    n: usize,
    unary: f64,
    pairwise: f64,
) -> Result<(FactorGraph, GeneratingSet)> {
    let mut b = ModelBuilder::new();
    for i in 0..n {
        b.add_variable(format!("x{i}"), 2)?;
    }
    for i in 0..n {
        b.add_feature(unary, vec![Literal::new(i, 1, true)])?;
        for j in i + 1..n {
            b.add_feature(
                pairwise,
                vec![Literal::new(i, 1, true), Literal::new(j, 1, true)],
            )?;
        }
    }
    let gens = (0..n.saturating_sub(1))
        .map(|i| Permutation::from_cycles(n, &[vec![i, i + 1]]))
        .collect::<Result<_>>()?;
    Ok((b.build()?, GeneratingSet::new(n, gens)?))
}

/// The four-atom smokes/cancer model on two people with the group swapping
/// the two people.
pub fn smokes_cancer_pair() -> Result<(FactorGraph, GeneratingSet)> {
    let grounded = ground_template(Template::SmokesCancer, 2, None, &EvidenceSpec::none())?;
    let group = grounded.renaming_group()?;
    Ok((grounded.model, group))
}
