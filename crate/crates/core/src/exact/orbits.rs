use std::collections::HashSet;

use super::{ExactDistribution, StateSpace, DEFAULT_SPACE_LIMIT};
use crate::error::{Error, Result};
use crate::group::{GeneratingSet, Permutation};
use crate::model::{FactorGraph, MarginalQuery};
use crate::numeric::NeumaierSum;

/// A partition of `0..len` into labelled blocks. Labels are assigned in
/// order of first appearance, so the representative of every block is its
/// smallest element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    representatives: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    /// Canonicalizes arbitrary labels.
    pub fn from_labels(raw: Vec<usize>) -> Self {
        let mut relabel = std::collections::HashMap::new();
        let mut representatives = Vec::new();
        let mut sizes = Vec::new();
        let labels = raw
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let next = representatives.len();
                let label = *relabel.entry(*l).or_insert(next);
                if label == next {
                    representatives.push(i);
                    sizes.push(0);
                }
                sizes[label] += 1;
                label
            })
            .collect();
        Partition {
            labels,
            representatives,
            sizes,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            labels: (0..n).collect(),
            representatives: (0..n).collect(),
            sizes: vec![1; n],
        }
    }

    /// Number of partitioned elements.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.representatives.len()
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn representatives(&self) -> &[usize] {
        &self.representatives
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks: Vec<Vec<usize>> =
            self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &l) in self.labels.iter().enumerate() {
            blocks[l].push(i);
        }
        blocks
    }
}

/// Orbits of the assignment space under the group, found by flood fill.
pub fn orbit_partition(group: &GeneratingSet, model: &FactorGraph) -> Result<Partition> {
    orbit_partition_with_limit(group, model, DEFAULT_SPACE_LIMIT)
}

pub fn orbit_partition_with_limit(
    group: &GeneratingSet,
    model: &FactorGraph,
    limit: u128,
) -> Result<Partition> {
    if group.degree() != model.num_variables() {
        return Err(Error::SizeMismatch {
            expected: model.num_variables(),
            found: group.degree(),
        });
    }
    let space = StateSpace::with_limit(model, limit)?;
    let free = space.free_variables();
    // For each generator, the rank weight each free variable's value lands on.
    let mut image_places = Vec::with_capacity(group.generators().len());
    for g in group.generators() {
        check_fixes_evidence(g, model)?;
        image_places.push(
            free.iter()
                .map(|&v| space.place_value(g.apply(v)))
                .collect::<Vec<_>>(),
        );
    }
    let n = space.size();
    let mut labels = vec![usize::MAX; n];
    let mut stack = Vec::new();
    let mut s = space.decode(0);
    let mut next = 0;
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = next;
        stack.push(start);
        while let Some(rank) = stack.pop() {
            space.decode_into(rank, &mut s);
            for places in &image_places {
                let image: usize = free.iter().zip(places).map(|(&v, &p)| s[v] * p).sum();
                if labels[image] == usize::MAX {
                    labels[image] = next;
                    stack.push(image);
                }
            }
        }
        next += 1;
    }
    Ok(Partition::from_labels(labels))
}

fn check_fixes_evidence(g: &Permutation, model: &FactorGraph) -> Result<()> {
    let evidence = model.evidence();
    for (v, e) in evidence.iter().enumerate() {
        if *e != evidence[g.apply(v)] {
            return Err(Error::EvidenceMismatch(v));
        }
    }
    Ok(())
}

/// All group elements, by closure of the generators under composition.
pub fn group_closure(group: &GeneratingSet, cap: usize) -> Result<Vec<Permutation>> {
    let identity = Permutation::identity(group.degree());
    let mut seen: HashSet<Vec<usize>> = HashSet::from([identity.image().to_vec()]);
    let mut elements = vec![identity];
    let mut head = 0;
    while head < elements.len() {
        for g in group.generators() {
            let h = elements[head].compose(g)?;
            if !seen.contains(h.image()) {
                if seen.len() >= cap {
                    return Err(Error::OrbitTooLarge { cap });
                }
                seen.insert(h.image().to_vec());
                elements.push(h);
            }
        }
        head += 1;
    }
    Ok(elements)
}

/// Number of assignments in each block that satisfy the query.
pub fn orbit_hits(space: &StateSpace, partition: &Partition, query: &MarginalQuery) -> Vec<usize> {
    let mut hits = vec![0; partition.num_blocks()];
    space.for_each(|rank, s| {
        if query.matches(s) {
            hits[partition.label(rank)] += 1;
        }
    });
    hits
}

/// `P(x̂ | O)` per orbit, as the fraction of orbit members satisfying the
/// query (the within-orbit distribution is uniform for automorphisms).
pub fn orbit_conditionals(
    space: &StateSpace,
    partition: &Partition,
    query: &MarginalQuery,
) -> Vec<f64> {
    orbit_hits(space, partition, query)
        .iter()
        .zip(partition.sizes())
        .map(|(&h, &size)| h as f64 / size as f64)
        .collect()
}

/// `|P(x̂) − Σ_O P(x̂|O) P(O)|`.
pub fn mixture_residual(
    dist: &ExactDistribution,
    partition: &Partition,
    query: &MarginalQuery,
) -> Result<f64> {
    if partition.len() != dist.probs().len() {
        return Err(Error::SizeMismatch {
            expected: dist.probs().len(),
            found: partition.len(),
        });
    }
    let conditionals = orbit_conditionals(dist.space(), partition, query);
    let mut mass = vec![NeumaierSum::new(); partition.num_blocks()];
    for (rank, &p) in dist.probs().iter().enumerate() {
        mass[partition.label(rank)].add(p);
    }
    let mixture: f64 = conditionals
        .iter()
        .zip(&mass)
        .map(|(c, m)| c * m.value())
        .collect::<NeumaierSum>()
        .value();
    Ok((dist.marginal(query) - mixture).abs())
}

pub fn mixture_check(
    model: &FactorGraph,
    group: &GeneratingSet,
    query: &MarginalQuery,
) -> Result<f64> {
    let dist = ExactDistribution::compute(model)?;
    let partition = orbit_partition(group, model)?;
    mixture_residual(&dist, &partition, query)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ground_template, EvidenceSpec, ModelBuilder, Template};

    fn four_atoms() -> FactorGraph {
        ground_template(Template::SmokesCancer, 2, None, &EvidenceSpec::none())
            .unwrap()
            .model
    }

    fn swap_group() -> GeneratingSet {
        let g = Permutation::from_cycles(4, &[vec![0, 1], vec![2, 3]]).unwrap();
        GeneratingSet::new(4, vec![g]).unwrap()
    }

    fn exchangeable(n: usize) -> (FactorGraph, GeneratingSet) {
        let mut b = ModelBuilder::new();
        for i in 0..n {
            b.add_variable(format!("x{i}"), 2).unwrap();
        }
        let m = b.build().unwrap();
        let gens = (0..n - 1)
            .map(|i| Permutation::from_cycles(n, &[vec![i, i + 1]]).unwrap())
            .collect();
        (m, GeneratingSet::new(n, gens).unwrap())
    }

    #[test]
    fn ten_orbits_on_four_atoms() {
        let p = orbit_partition(&swap_group(), &four_atoms()).unwrap();
        assert_eq!((p.len(), p.num_blocks()), (16, 10));
        let p = orbit_partition(&GeneratingSet::trivial(4), &four_atoms()).unwrap();
        assert_eq!(p.num_blocks(), 16);
    }

    #[test]
    fn symmetric_group_orbits_are_weight_classes() {
        let (m, g) = exchangeable(4);
        let p = orbit_partition(&g, &m).unwrap();
        assert_eq!(p.num_blocks(), 5);
        let mut sizes = p.sizes().to_vec();
        sizes.sort();
        assert_eq!(sizes, vec![1, 1, 4, 4, 6]);
    }

    #[test]
    fn labels_are_invariant_and_representatives_minimal() {
        let m = four_atoms();
        let g = swap_group();
        let p = orbit_partition(&g, &m).unwrap();
        let space = StateSpace::new(&m).unwrap();
        for rank in 0..space.size() {
            let s = space.decode(rank);
            let image = g.generators()[0].apply_to_assignment(&s).unwrap();
            assert_eq!(p.label(space.encode(&image)), p.label(rank));
        }
        for (block, members) in p.blocks().iter().enumerate() {
            assert_eq!(p.representatives()[block], members[0]);
        }
    }

    #[test]
    fn evidence_must_be_fixed() {
        let m = four_atoms().with_evidence(&[(0, 1)]).unwrap();
        assert_eq!(
            orbit_partition(&swap_group(), &m).unwrap_err(),
            Error::EvidenceMismatch(0)
        );
    }

    #[test]
    fn closure_orders() {
        assert_eq!(group_closure(&exchangeable(4).1, 100).unwrap().len(), 24);
        assert_eq!(group_closure(&swap_group(), 100).unwrap().len(), 2);
        assert!(group_closure(&exchangeable(5).1, 100).is_err());
    }

    #[test]
    fn mixture_residuals() {
        let m = four_atoms();
        let q = MarginalQuery::single(&m, 0, 1).unwrap();
        assert!(mixture_check(&m, &swap_group(), &q).unwrap() <= 1e-12);
        assert_eq!(
            mixture_check(&m, &GeneratingSet::trivial(4), &q).unwrap(),
            0.0
        );
    }

    #[test]
    fn partition_canonicalization() {
        let p = Partition::from_labels(vec![7, 3, 7, 9]);
        assert_eq!(p.labels(), &[0, 1, 0, 2]);
        assert_eq!(p.representatives(), &[0, 1, 3]);
        assert_eq!(p.sizes(), &[2, 1, 1]);
    }
}
