//! Shared inputs for the criterion benches.

use qdt_core::hilbert::{PartialIsometryAct, StateVector, Subspace};
use qdt_core::preference::UtilityTable;
use qdt_core::problem::QuantumDecisionProblem;
use qdt_core::sampling::{random_isometry, random_problem, random_state_in, stream_rng, Layout};

/// An eight-dimensional problem with four rewards and roomy extremes, a
/// state in its first macrostate and two acts on that macrostate.
pub struct Scenario {
    pub problem: QuantumDecisionProblem,
    pub utility: UtilityTable,
    pub psi: StateVector,
    pub left: PartialIsometryAct,
    pub right: PartialIsometryAct,
}

pub fn scenario(seed: u64) -> Scenario {
    let mut rng = stream_rng(seed, 0);
    let layout = Layout {
        macrostate_dims: vec![3, 1, 1, 3],
        rewards: vec![vec![0], vec![1], vec![2], vec![3]],
    };
    let problem = random_problem(&mut rng, &layout);
    let utility = UtilityTable::from_pairs([("r0", 0.0), ("s1", 0.25), ("s2", 0.6), ("r1", 1.0)]);
    let domain = problem.macrostates[0].subspace.clone();
    let full = Subspace::full(problem.dim);
    let psi = random_state_in(&mut rng, &domain).expect("nonzero macrostate");
    let left = random_isometry(&mut rng, &domain, &full).expect("room for the domain");
    let right = random_isometry(&mut rng, &domain, &full).expect("room for the domain");
    Scenario {
        problem,
        utility,
        psi,
        left,
        right,
    }
}
