//! Grounding of the built-in relational templates (Friends & Smokers
//! family) into factor graphs.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;

use super::{FactorGraph, Literal, ModelBuilder};
use crate::error::{Error, Result};
use crate::group::{renaming_generators, GeneratingSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    Smokes,
    Cancer,
    Asthma,
    Friends,
}

impl Predicate {
    pub fn name(self) -> &'static str {
        match self {
            Predicate::Smokes => "smokes",
            Predicate::Cancer => "cancer",
            Predicate::Asthma => "asthma",
            Predicate::Friends => "friends",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Predicate::Friends => 2,
            _ => 1,
        }
    }
}

impl FromStr for Predicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smokes" => Ok(Predicate::Smokes),
            "cancer" => Ok(Predicate::Cancer),
            "asthma" => Ok(Predicate::Asthma),
            "friends" => Ok(Predicate::Friends),
            _ => Err(Error::InvalidEvidence(format!("unknown predicate `{s}`"))),
        }
    }
}

/// A ground atom: predicate plus constant indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomKey {
    pub predicate: Predicate,
    pub args: Vec<usize>,
}

impl AtomKey {
    pub fn new(predicate: Predicate, args: Vec<usize>) -> Self {
        AtomKey { predicate, args }
    }
}

/// The built-in relational schemas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    /// smokes/cancer only; three formulas, no friends relation.
    SmokesCancer,
    /// Friends & Smokers: smoking causes cancer, friends influence smoking.
    Smokers,
    /// Friends & Smokers plus transitivity of `friends`.
    SmokersTransitivity,
    /// Friends & Smokers plus an `asthma` predicate.
    AsthmaLite,
}

impl Template {
    pub fn name(self) -> &'static str {
        match self {
            Template::SmokesCancer => "smokes-cancer",
            Template::Smokers => "smokers",
            Template::SmokersTransitivity => "smokers-transitivity",
            Template::AsthmaLite => "asthma-lite",
        }
    }

    pub fn predicates(self) -> &'static [Predicate] {
        use Predicate::*;
        match self {
            Template::SmokesCancer => &[Smokes, Cancer],
            Template::Smokers | Template::SmokersTransitivity => &[Smokes, Cancer, Friends],
            Template::AsthmaLite => &[Smokes, Cancer, Asthma, Friends],
        }
    }

    /// Per-formula weights, in the order the formulas are grounded.
    pub fn default_weights(self) -> &'static [f64] {
        match self {
            // smokes(x) => cancer(x); smokes(x) => smokes(y); smokes(x)
            Template::SmokesCancer => &[1.5, 1.1, -0.5],
            // smokes(x) => cancer(x); friends(x,y) ^ smokes(x) => smokes(y)
            Template::Smokers => &[1.5, 1.1],
            // ... ; friends(x,y) ^ friends(y,z) => friends(x,z)
            Template::SmokersTransitivity => &[1.5, 1.1, 1.0],
            // ... ; asthma(x) => !smokes(x); asthma(x) ^ friends(x,y) => !smokes(y)
            Template::AsthmaLite => &[1.5, 1.1, 1.4, 0.8],
        }
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smokes-cancer" => Ok(Template::SmokesCancer),
            "smokers" => Ok(Template::Smokers),
            "smokers-transitivity" | "smokers+transitivity" => Ok(Template::SmokersTransitivity),
            "asthma-lite" => Ok(Template::AsthmaLite),
            _ => Err(Error::UnknownTemplate(s.to_string())),
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceAtom {
    pub atom: AtomKey,
    pub value: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvidenceSpec {
    pub atoms: Vec<EvidenceAtom>,
}

impl EvidenceSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn push(&mut self, predicate: Predicate, args: Vec<usize>, value: bool) {
        self.atoms.push(EvidenceAtom {
            atom: AtomKey::new(predicate, args),
            value,
        });
    }
}

/// Maps ground atoms to variable ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundingIndex {
    constants: Vec<String>,
    atoms: BTreeMap<AtomKey, usize>,
}

impl GroundingIndex {
    pub fn new(constants: Vec<String>, atoms: BTreeMap<AtomKey, usize>) -> Self {
        GroundingIndex { constants, atoms }
    }

    pub fn constants(&self) -> &[String] {
        &self.constants
    }

    pub fn atom(&self, predicate: Predicate, args: &[usize]) -> Option<usize> {
        self.atoms
            .get(&AtomKey::new(predicate, args.to_vec()))
            .copied()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&AtomKey, usize)> {
        self.atoms.iter().map(|(k, &v)| (k, v))
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    fn atom_name(&self, key: &AtomKey) -> String {
        let args: Vec<&str> = key
            .args
            .iter()
            .map(|&c| self.constants[c].as_str())
            .collect();
        format!("{}({})", key.predicate.name(), args.join(","))
    }
}

/// A ground template together with its atom index and the partition of
/// constants into interchangeable classes.
#[derive(Debug, Clone)]
pub struct GroundedModel {
    pub model: FactorGraph,
    pub index: GroundingIndex,
    pub constant_classes: Vec<Vec<usize>>,
}

impl GroundedModel {
    /// Renaming automorphisms induced by the constant classes.
    pub fn renaming_group(&self) -> Result<GeneratingSet> {
        renaming_generators(&self.constant_classes, &self.index)
    }
}

fn constant_names(d: usize) -> Vec<String> {
    if d <= 26 {
        (0..d)
            .map(|i| ((b'A' + i as u8) as char).to_string())
            .collect()
    } else {
        (0..d).map(|i| format!("P{i}")).collect()
    }
}

/// Grounds `template` over `d` constants.
///
/// Variables are declared predicate by predicate (all `smokes`, then all
/// `cancer`, ...), constants in order, binary atoms row-major. Reflexive
/// `friends(x,x)` atoms are variables but take part in no formula; pair
/// formulas range over `x != y` and transitivity over ordered triples of
/// distinct constants.
pub fn ground_template(
    template: Template,
    d: usize,
    weights: Option<&[f64]>,
    evidence: &EvidenceSpec,
) -> Result<GroundedModel> {
    if d == 0 {
        return Err(Error::InvalidModel("domain size must be at least 1".into()));
    }
    let weights = weights.unwrap_or(template.default_weights());
    if weights.len() != template.default_weights().len() {
        return Err(Error::InvalidModel(format!(
            "template `{template}` takes {} weights, got {}",
            template.default_weights().len(),
            weights.len()
        )));
    }
    let constants = constant_names(d);
    let mut builder = ModelBuilder::new();
    let mut atoms = BTreeMap::new();
    let mut index = GroundingIndex::new(constants, BTreeMap::new());
    for &p in template.predicates() {
        let tuples: Vec<Vec<usize>> = if p.arity() == 1 {
            (0..d).map(|x| vec![x]).collect()
        } else {
            (0..d)
                .flat_map(|x| (0..d).map(move |y| vec![x, y]))
                .collect()
        };
        for args in tuples {
            let key = AtomKey::new(p, args);
            let id = builder.add_variable(index.atom_name(&key), 2)?;
            atoms.insert(key, id);
        }
    }
    index.atoms = atoms;
    let atom = |p: Predicate, args: &[usize]| index.atom(p, args).expect("grounded atom");
    let pos = |v: usize| Literal::new(v, 1, true);
    let neg = |v: usize| Literal::new(v, 1, false);
    use Predicate::*;

    // smokes(x) => cancer(x)
    for x in 0..d {
        builder.add_feature(
            weights[0],
            vec![neg(atom(Smokes, &[x])), pos(atom(Cancer, &[x]))],
        )?;
    }
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|x| (0..d).map(move |y| (x, y)))
        .filter(|(x, y)| x != y)
        .collect();
    match template {
        Template::SmokesCancer => {
            for &(x, y) in &pairs {
                builder.add_feature(
                    weights[1],
                    vec![neg(atom(Smokes, &[x])), pos(atom(Smokes, &[y]))],
                )?;
            }
            for x in 0..d {
                builder.add_feature(weights[2], vec![pos(atom(Smokes, &[x]))])?;
            }
        }
        Template::Smokers | Template::SmokersTransitivity | Template::AsthmaLite => {
            // friends(x,y) ^ smokes(x) => smokes(y)
            for &(x, y) in &pairs {
                builder.add_feature(
                    weights[1],
                    vec![
                        neg(atom(Friends, &[x, y])),
                        neg(atom(Smokes, &[x])),
                        pos(atom(Smokes, &[y])),
                    ],
                )?;
            }
        }
    }
    if template == Template::SmokersTransitivity {
        for x in 0..d {
            for y in 0..d {
                for z in 0..d {
                    if x == y || y == z || x == z {
                        continue;
                    }
                    builder.add_feature(
                        weights[2],
                        vec![
                            neg(atom(Friends, &[x, y])),
                            neg(atom(Friends, &[y, z])),
                            pos(atom(Friends, &[x, z])),
                        ],
                    )?;
                }
            }
        }
    }
    if template == Template::AsthmaLite {
        for x in 0..d {
            builder.add_feature(
                weights[2],
                vec![neg(atom(Asthma, &[x])), neg(atom(Smokes, &[x]))],
            )?;
        }
        for &(x, y) in &pairs {
            builder.add_feature(
                weights[3],
                vec![
                    neg(atom(Asthma, &[x])),
                    neg(atom(Friends, &[x, y])),
                    neg(atom(Smokes, &[y])),
                ],
            )?;
        }
    }

    let mut observed: HashMap<AtomKey, bool> = HashMap::new();
    for e in &evidence.atoms {
        if e.atom.args.len() != e.atom.predicate.arity() {
            return Err(Error::InvalidEvidence(format!(
                "`{}` expects {} arguments",
                e.atom.predicate.name(),
                e.atom.predicate.arity()
            )));
        }
        if let Some(&c) = e.atom.args.iter().find(|&&c| c >= d) {
            return Err(Error::InvalidEvidence(format!(
                "constant {c} out of range for domain size {d}"
            )));
        }
        let var = index.atom(e.atom.predicate, &e.atom.args).ok_or_else(|| {
            Error::InvalidEvidence(format!(
                "predicate `{}` is not part of template `{template}`",
                e.atom.predicate.name()
            ))
        })?;
        builder.set_evidence(var, e.value as usize)?;
        observed.insert(e.atom.clone(), e.value);
    }
    let constant_classes = constant_classes(d, &observed);
    Ok(GroundedModel {
        model: builder.build()?,
        index,
        constant_classes,
    })
}

/// Partitions constants so that two constants share a class iff swapping
/// them leaves the evidence invariant. Transposition-invariance is an
/// equivalence relation, so comparing with each class's first member is
/// enough.
fn constant_classes(d: usize, observed: &HashMap<AtomKey, bool>) -> Vec<Vec<usize>> {
    let swap_preserves = |a: usize, b: usize| {
        observed.iter().all(|(key, value)| {
            let args = key
                .args
                .iter()
                .map(|&c| {
                    if c == a {
                        b
                    } else if c == b {
                        a
                    } else {
                        c
                    }
                })
                .collect();
            observed.get(&AtomKey::new(key.predicate, args)) == Some(value)
        })
    };
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for c in 0..d {
        match classes.iter_mut().find(|class| swap_preserves(class[0], c)) {
            Some(class) => class.push(c),
            None => classes.push(vec![c]),
        }
    }
    classes
}

/// Random evidence in the style of "for a fraction of people it is known
/// whether they smoke and who their friends are": `round(frac * d)` people
/// are observed; each gets an observed `smokes` atom and a fully observed
/// `friends` row with `min(10, d - 1)` friends.
pub fn random_evidence<R: Rng + ?Sized>(d: usize, frac: f64, rng: &mut R) -> EvidenceSpec {
    let mut spec = EvidenceSpec::none();
    let observed = ((frac.clamp(0.0, 1.0) * d as f64).round() as usize).min(d);
    if observed == 0 {
        return spec;
    }
    let mut people = sample(rng, d, observed).into_vec();
    people.sort_unstable();
    let num_friends = 10.min(d.saturating_sub(1));
    for p in people {
        spec.push(Predicate::Smokes, vec![p], rng.gen_bool(0.5));
        let others: Vec<usize> = (0..d).filter(|&q| q != p).collect();
        let mut chosen = sample(rng, others.len(), num_friends).into_vec();
        chosen.sort_unstable();
        let mut is_friend = vec![false; d];
        for i in chosen {
            is_friend[others[i]] = true;
        }
        for &q in &others {
            spec.push(Predicate::Friends, vec![p, q], is_friend[q]);
        }
    }
    spec
}
