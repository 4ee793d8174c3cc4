//! Permutations of variable indices, generating sets, and orbits.
//!
//! Composition convention: `g.compose(&h)` applies `g` first, then `h`, so
//! `(g.compose(&h)).apply(i) == h.apply(g.apply(i))`. Acting on an
//! assignment moves values along the permutation: if `r = g.apply_to_assignment(s)`
//! then `r[g(i)] = s[i]`. With this convention
//! `apply(compose(g, h), s) == apply(h, apply(g, s))`.

mod orbit;
mod renaming;
mod verify;

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::model::FactorGraph;

pub use orbit::{
    orbit_hamming_weight, orbit_of_sequence, orbit_of_sequence_with_cap, variable_orbits,
    SequenceOrbit, VariablePartition, DEFAULT_ORBIT_CAP,
};
pub use renaming::renaming_generators;
pub use verify::{verify_automorphism, AutomorphismVerdict, VerifyMode};

/// A bijection on `{0, .., n-1}` stored as its image array.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            image: (0..n).collect(),
        }
    }

    pub fn from_image(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        let mut seen = vec![false; n];
        for &x in &image {
            if x >= n || std::mem::replace(&mut seen[x], true) {
                return Err(Error::InvalidPermutation(format!(
                    "image {image:?} is not a bijection"
                )));
            }
        }
        Ok(Permutation { image })
    }

    pub(crate) fn from_image_unchecked(image: Vec<usize>) -> Self {
        debug_assert!(Self::from_image(image.clone()).is_ok());
        Permutation { image }
    }

    /// Builds a permutation from disjoint cycles; `(a b c)` maps a→b→c→a.
    pub fn from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut image: Vec<usize> = (0..n).collect();
        let mut used = vec![false; n];
        for cycle in cycles {
            for &x in cycle {
                if x >= n {
                    return Err(Error::InvalidPermutation(format!(
                        "point {x} out of range {n}"
                    )));
                }
                if std::mem::replace(&mut used[x], true) {
                    return Err(Error::InvalidPermutation(format!(
                        "point {x} appears in more than one cycle position"
                    )));
                }
            }
            for (i, &x) in cycle.iter().enumerate() {
                image[x] = cycle[(i + 1) % cycle.len()];
            }
        }
        Ok(Permutation { image })
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.image[i]
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &x)| i == x)
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.image.len() {
            return Err(Error::SizeMismatch {
                expected: self.image.len(),
                found,
            });
        }
        Ok(())
    }

    /// `self` first, then `other`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        self.check_len(other.len())?;
        Ok(Permutation {
            image: self.image.iter().map(|&x| other.image[x]).collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut image = vec![0; self.image.len()];
        for (i, &x) in self.image.iter().enumerate() {
            image[x] = i;
        }
        Permutation { image }
    }

    /// `r[g(i)] = s[i]`.
    pub fn apply_to_assignment(&self, s: &[usize]) -> Result<Vec<usize>> {
        self.check_len(s.len())?;
        let mut out = vec![0; s.len()];
        self.apply_to_assignment_into(s, &mut out);
        Ok(out)
    }

    #[inline]
    pub fn apply_to_assignment_into(&self, s: &[usize], out: &mut [usize]) {
        for (i, &x) in self.image.iter().enumerate() {
            out[x] = s[i];
        }
    }

    /// Elementwise image of a variable sequence, order preserved.
    pub fn apply_to_sequence(&self, seq: &[usize]) -> Result<Vec<usize>> {
        seq.iter()
            .map(|&v| {
                self.image.get(v).copied().ok_or(Error::SizeMismatch {
                    expected: self.image.len(),
                    found: v + 1,
                })
            })
            .collect()
    }

    /// Nontrivial cycles, each starting at its smallest point, ordered by
    /// that point.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.image.len()];
        let mut cycles = Vec::new();
        for start in 0..self.image.len() {
            if seen[start] || self.image[start] == start {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut x = self.image[start];
            while x != start {
                seen[x] = true;
                cycle.push(x);
                x = self.image[x];
            }
            cycles.push(cycle);
        }
        cycles
    }
}

/// Generators of a permutation group on `n` points. An empty list is the
/// trivial group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratingSet {
    n: usize,
    generators: Vec<Permutation>,
}

impl GeneratingSet {
    pub fn new(n: usize, generators: Vec<Permutation>) -> Result<Self> {
        for g in &generators {
            if g.len() != n {
                return Err(Error::SizeMismatch {
                    expected: n,
                    found: g.len(),
                });
            }
        }
        Ok(GeneratingSet { n, generators })
    }

    pub fn trivial(n: usize) -> Self {
        GeneratingSet {
            n,
            generators: Vec::new(),
        }
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    pub fn is_trivial(&self) -> bool {
        self.generators.iter().all(Permutation::is_identity)
    }

    /// Parses one generator per line in cycle notation over variable names,
    /// e.g. `(smokes(A) smokes(B))(cancer(A) cancer(B))`. Names may contain
    /// balanced parentheses. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, model: &FactorGraph) -> Result<Self> {
        let n = model.num_variables();
        let mut generators = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let wrap = |e: Error| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            };
            let cycles = parse_cycles(line).map_err(wrap)?;
            let cycles = cycles
                .into_iter()
                .map(|c| c.iter().map(|name| model.variable_id(name)).collect())
                .collect::<Result<Vec<Vec<usize>>>>()
                .map_err(wrap)?;
            generators.push(Permutation::from_cycles(n, &cycles).map_err(wrap)?);
        }
        GeneratingSet::new(n, generators)
    }

    /// Writes one generator per line in cycle notation; identity generators
    /// are written as `()`.
    pub fn to_text(&self, model: &FactorGraph) -> String {
        let mut out = String::new();
        for g in &self.generators {
            let cycles = g.cycles();
            if cycles.is_empty() {
                out.push_str("()");
            }
            for cycle in cycles {
                out.push('(');
                let names: Vec<&str> = cycle
                    .iter()
                    .map(|&v| model.variable(v).name.as_str())
                    .collect();
                out.push_str(&names.join(" "));
                out.push(')');
            }
            writeln!(out).unwrap();
        }
        out
    }
}

fn parse_cycles(line: &str) -> Result<Vec<Vec<String>>> {
    let bad = |m: &str| Error::InvalidPermutation(format!("{m} in `{line}`"));
    let mut cycles = Vec::new();
    let mut current: Option<Vec<String>> = None;
    let mut token = String::new();
    let mut depth = 0usize;
    for c in line.chars() {
        match (depth, c) {
            (0, '(') => {
                depth = 1;
                current = Some(Vec::new());
            }
            (0, c) if c.is_whitespace() => {}
            (0, _) => return Err(bad("text outside a cycle")),
            (1, ')') => {
                let mut cycle = current.take().unwrap();
                if !token.is_empty() {
                    cycle.push(std::mem::take(&mut token));
                }
                if !cycle.is_empty() {
                    cycles.push(cycle);
                }
                depth = 0;
            }
            (1, c) if c.is_whitespace() => {
                if !token.is_empty() {
                    current.as_mut().unwrap().push(std::mem::take(&mut token));
                }
            }
            (_, '(') => {
                depth += 1;
                token.push(c);
            }
            (_, ')') => {
                depth -= 1;
                token.push(c);
            }
            (_, c) => token.push(c),
        }
    }
    if depth != 0 {
        return Err(bad("unbalanced parentheses"));
    }
    Ok(cycles)
}
