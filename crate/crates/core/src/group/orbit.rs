use std::collections::HashSet;

use super::GeneratingSet;
use crate::error::{Error, Result};
use crate::model::MarginalQuery;

pub const DEFAULT_ORBIT_CAP: usize = 1_000_000;

/// The orbit `A^G` of an ordered variable sequence. Distinct orderings are
/// distinct members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceOrbit {
    width: usize,
    members: Vec<usize>,
    generator_applications: usize,
}

impl SequenceOrbit {
    /// The sequence the orbit was built from; always the first member.
    pub fn base(&self) -> &[usize] {
        &self.members[..self.width]
    }

    /// Length of each member sequence.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of members `|A^G|`.
    pub fn len(&self) -> usize {
        self.members.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn members(&self) -> impl Iterator<Item = &[usize]> {
        self.members.chunks(self.width)
    }

    /// Number of sequence-by-generator applications performed while
    /// building the orbit.
    pub fn generator_applications(&self) -> usize {
        self.generator_applications
    }
}

pub fn orbit_of_sequence(group: &GeneratingSet, seq: &[usize]) -> Result<SequenceOrbit> {
    orbit_of_sequence_with_cap(group, seq, DEFAULT_ORBIT_CAP)
}

/// Breadth-first closure of `{seq}` under the generators. Performs exactly
/// `|R| * |orbit|` generator applications.
pub fn orbit_of_sequence_with_cap(
    group: &GeneratingSet,
    seq: &[usize],
    cap: usize,
) -> Result<SequenceOrbit> {
    let n = group.degree();
    if seq.is_empty() {
        return Err(Error::InvalidQuery("orbit of an empty sequence".into()));
    }
    if let Some(&v) = seq.iter().find(|&&v| v >= n) {
        return Err(Error::SizeMismatch {
            expected: n,
            found: v + 1,
        });
    }
    let width = seq.len();
    let mut members = seq.to_vec();
    let mut seen: HashSet<Vec<usize>> = HashSet::from([seq.to_vec()]);
    let mut applications = 0;
    let mut head = 0;
    let mut image = vec![0; width];
    while head * width < members.len() {
        for g in group.generators() {
            let current = &members[head * width..(head + 1) * width];
            for (dst, &v) in image.iter_mut().zip(current) {
                *dst = g.apply(v);
            }
            applications += 1;
            if !seen.contains(image.as_slice()) {
                if seen.len() >= cap {
                    return Err(Error::OrbitTooLarge { cap });
                }
                seen.insert(image.clone());
                members.extend_from_slice(&image);
            }
        }
        head += 1;
    }
    Ok(SequenceOrbit {
        width,
        members,
        generator_applications: applications,
    })
}

/// Orbit Hamming weight: the number of members `A` of the orbit with
/// `s⟨A⟩ = x̂`.
#[inline]
pub fn orbit_hamming_weight(s: &[usize], query: &MarginalQuery, orbit: &SequenceOrbit) -> usize {
    let target = query.target();
    orbit
        .members()
        .filter(|member| member.iter().zip(target).all(|(&v, &x)| s[v] == x))
        .count()
}

/// Orbit partition of the single variables under a group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariablePartition {
    block_of: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl VariablePartition {
    /// Every variable in its own block.
    pub fn singletons(n: usize) -> Self {
        VariablePartition {
            block_of: (0..n).collect(),
            blocks: (0..n).map(|v| vec![v]).collect(),
        }
    }

    pub fn block_of(&self, v: usize) -> usize {
        self.block_of[v]
    }

    pub fn block_labels(&self) -> &[usize] {
        &self.block_of
    }

    /// Blocks ordered by smallest member; members sorted.
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_variables(&self) -> usize {
        self.block_of.len()
    }
}

/// Variable orbits via union-find over generator images, `O(|R| n)`.
pub fn variable_orbits(group: &GeneratingSet) -> VariablePartition {
    let n = group.degree();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for g in group.generators() {
        for i in 0..n {
            let (a, b) = (find(&mut parent, i), find(&mut parent, g.apply(i)));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut block_of = vec![usize::MAX; n];
    let mut root_block = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for (v, slot) in block_of.iter_mut().enumerate() {
        let r = find(&mut parent, v);
        if root_block[r] == usize::MAX {
            root_block[r] = blocks.len();
            blocks.push(Vec::new());
        }
        *slot = root_block[r];
        blocks[root_block[r]].push(v);
    }
    VariablePartition { block_of, blocks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Permutation;
    use crate::model::ModelBuilder;

    fn example_group() -> GeneratingSet {
        let g = Permutation::from_cycles(4, &[vec![0, 1], vec![2, 3]]).unwrap();
        GeneratingSet::new(4, vec![g]).unwrap()
    }

    fn s3() -> GeneratingSet {
        let a = Permutation::from_cycles(3, &[vec![0, 1]]).unwrap();
        let b = Permutation::from_cycles(3, &[vec![1, 2]]).unwrap();
        GeneratingSet::new(3, vec![a, b]).unwrap()
    }

    #[test]
    fn trivial_group_orbit_is_singleton() {
        let orbit = orbit_of_sequence(&GeneratingSet::trivial(5), &[3, 1]).unwrap();
        assert_eq!(orbit.len(), 1);
        assert_eq!(orbit.base(), &[3, 1]);
    }

    #[test]
    fn example_orbit_has_two_members() {
        let orbit = orbit_of_sequence(&example_group(), &[0]).unwrap();
        let members: Vec<&[usize]> = orbit.members().collect();
        assert_eq!(members, vec![&[0][..], &[1][..]]);
    }

    #[test]
    fn s3_orbit_of_pair_is_all_ordered_pairs() {
        let orbit = orbit_of_sequence(&s3(), &[0, 1]).unwrap();
        let mut expected = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    expected.push(vec![a, b]);
                }
            }
        }
        let mut got: Vec<Vec<usize>> = orbit.members().map(<[usize]>::to_vec).collect();
        got.sort();
        assert_eq!(got, expected);
        assert_eq!(orbit.generator_applications(), 2 * 6);
    }

    #[test]
    fn orbit_cap_is_enforced() {
        assert_eq!(
            orbit_of_sequence_with_cap(&s3(), &[0, 1], 5),
            Err(Error::OrbitTooLarge { cap: 5 })
        );
        assert!(orbit_of_sequence_with_cap(&s3(), &[0, 1], 6).is_ok());
    }

    #[test]
    fn example_hamming_weight() {
        let mut b = ModelBuilder::new();
        for name in ["smokes(A)", "smokes(B)", "cancer(A)", "cancer(B)"] {
            b.add_variable(name, 2).unwrap();
        }
        let m = b.build().unwrap();
        let q = MarginalQuery::single(&m, 0, 1).unwrap();
        let orbit = orbit_of_sequence(&example_group(), q.vars()).unwrap();
        assert_eq!(orbit_hamming_weight(&[1, 0, 1, 0], &q, &orbit), 1);
        assert_eq!(orbit_hamming_weight(&[1, 1, 0, 0], &q, &orbit), 2);
        let trivial = orbit_of_sequence(&GeneratingSet::trivial(4), q.vars()).unwrap();
        assert_eq!(orbit_hamming_weight(&[0, 1, 1, 0], &q, &trivial), 0);
    }

    #[test]
    fn variable_orbits_union_generators() {
        let p = variable_orbits(&example_group());
        assert_eq!(p.blocks(), &[vec![0, 1], vec![2, 3]]);
        let p = variable_orbits(&GeneratingSet::trivial(3));
        assert_eq!(p, VariablePartition::singletons(3));
    }
}
