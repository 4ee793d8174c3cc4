//! Fixtures shared by the criterion benches.

use symrb::model::{
    grid_symmetry_generators, ground_template, make_grid_model, EvidenceSpec, GridMode, Template,
};
use symrb::sampler::{gibbs_step, ChainState, ScanOrder};
use symrb::{FactorGraph, GeneratingSet};

/// Friends & Smokers over `d` people with its renaming group.
pub fn smokers(d: usize) -> (FactorGraph, GeneratingSet) {
    let grounded =
        ground_template(Template::Smokers, d, None, &EvidenceSpec::none()).expect("valid template");
    let group = grounded.renaming_group().expect("renaming group");
    (grounded.model, group)
}

/// Soft 2-coloring grid `n x n` with weight 0.2 and its dihedral group.
pub fn grid(n: usize) -> (FactorGraph, GeneratingSet) {
    let model = make_grid_model(n, n, GridMode::Soft(0.2)).expect("grid size > 0");
    (model, grid_symmetry_generators(n, n))
}

/// `count` consecutive random-scan Gibbs states after `burn_in` steps.
pub fn gibbs_samples(
    model: &FactorGraph,
    count: usize,
    burn_in: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let mut state = ChainState::new(model, seed, 0).expect("initial state");
    for _ in 0..burn_in {
        gibbs_step(model, &mut state, ScanOrder::Random).expect("gibbs step");
    }
    (0..count)
        .map(|_| {
            gibbs_step(model, &mut state, ScanOrder::Random).expect("gibbs step");
            state.current().to_vec()
        })
        .collect()
}
