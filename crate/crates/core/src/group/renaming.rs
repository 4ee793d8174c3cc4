use super::{GeneratingSet, Permutation};
use crate::error::{Error, Result};
use crate::model::{AtomKey, GroundingIndex};

/// Lifts constant renamings to variable permutations. For each class
/// `[c1, c2, .., ck]` of interchangeable constants this emits the adjacent
/// transpositions `(c1 c2), (c2 c3), ..`, which generate the full symmetric
/// group on the class while keeping `|R|` linear in the class size.
pub fn renaming_generators(
    classes: &[Vec<usize>],
    index: &GroundingIndex,
) -> Result<GeneratingSet> {
    let d = index.constants().len();
    let n = index.num_atoms();
    let mut seen = vec![false; d];
    for &c in classes.iter().flatten() {
        if c >= d {
            return Err(Error::InvalidEvidence(format!(
                "constant class references unknown constant {c}"
            )));
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(Error::InvalidEvidence(format!(
                "constant {c} appears in more than one class"
            )));
        }
    }
    let mut generators = Vec::new();
    for class in classes {
        for pair in class.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let mut image = vec![usize::MAX; n];
            for (atom, var) in index.atoms() {
                let args: Vec<usize> = atom
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
                let target = index.atom(atom.predicate, &args).ok_or_else(|| {
                    let key = AtomKey::new(atom.predicate, args.clone());
                    Error::InvalidModel(format!("renamed atom {key:?} is not grounded"))
                })?;
                image[var] = target;
            }
            generators.push(Permutation::from_image(image)?);
        }
    }
    GeneratingSet::new(n, generators)
}
