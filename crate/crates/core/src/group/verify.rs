use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Permutation;
use crate::error::Result;
use crate::exact::StateSpace;
use crate::model::FactorGraph;

/// Relative tolerance for comparing log weights.
const LOG_WEIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    /// Every evidence-consistent assignment; the free space must fit the
    /// exact-enumeration limit.
    Exhaustive,
    /// `samples` uniformly drawn evidence-consistent assignments.
    Sampled { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutomorphismVerdict {
    pub holds: bool,
    /// An assignment `s` with `w(s) != w(s^g)`, when one was found.
    pub counterexample: Option<Vec<usize>>,
    pub reason: Option<String>,
}

impl AutomorphismVerdict {
    fn pass() -> Self {
        AutomorphismVerdict {
            holds: true,
            counterexample: None,
            reason: None,
        }
    }

    fn fail(reason: impl Into<String>, counterexample: Option<Vec<usize>>) -> Self {
        AutomorphismVerdict {
            holds: false,
            counterexample,
            reason: Some(reason.into()),
        }
    }
}

fn same_log_weight(a: f64, b: f64) -> bool {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return a == b;
    }
    (a - b).abs() <= LOG_WEIGHT_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Checks that `g` preserves domains and evidence and that
/// `log w(s) = log w(s^g)` on the checked assignments.
pub fn verify_automorphism(
    model: &FactorGraph,
    g: &Permutation,
    mode: VerifyMode,
) -> Result<AutomorphismVerdict> {
    let n = model.num_variables();
    if g.len() != n {
        return Ok(AutomorphismVerdict::fail(
            format!(
                "permutation acts on {} points, model has {n} variables",
                g.len()
            ),
            None,
        ));
    }
    for i in 0..n {
        let j = g.apply(i);
        if model.cardinality(i) != model.cardinality(j) {
            return Ok(AutomorphismVerdict::fail(
                format!("variables {i} and {j} have different domains"),
                None,
            ));
        }
        if model.evidence()[i] != model.evidence()[j] {
            return Ok(AutomorphismVerdict::fail(
                format!("permutation moves variable {i} to {j} with different evidence"),
                None,
            ));
        }
    }
    let mut image = vec![0; n];
    let mut check = |s: &[usize]| {
        g.apply_to_assignment_into(s, &mut image);
        same_log_weight(
            model.log_weight_unchecked(s),
            model.log_weight_unchecked(&image),
        )
    };
    match mode {
        VerifyMode::Exhaustive => {
            let space = StateSpace::new(model)?;
            let mut s = model.evidence_assignment();
            for rank in 0..space.size() {
                space.decode_into(rank, &mut s);
                if !check(&s) {
                    return Ok(AutomorphismVerdict::fail("log weight changes", Some(s)));
                }
            }
        }
        VerifyMode::Sampled { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = model.evidence_assignment();
            for _ in 0..samples {
                for &v in model.free_variables() {
                    s[v] = rng.gen_range(0..model.cardinality(v));
                }
                if !check(&s) {
                    return Ok(AutomorphismVerdict::fail("log weight changes", Some(s)));
                }
            }
        }
    }
    Ok(AutomorphismVerdict::pass())
}
