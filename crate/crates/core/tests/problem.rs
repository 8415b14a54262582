use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use qdt_core::hilbert::{StateVector, C64};
use qdt_core::problem::{
    born_weights, branch_decomposition, event_lattice, smallest_event, validate_problem, Event, QuantumDecisionProblem,
};
use qdt_core::sampling::{random_isometry, random_problem, random_state, stream_rng, Layout};

/// Up to 6 macrostates of dimension 1 or 2 (total at most 8) grouped into
/// 2 to 4 rewards.
fn layout<R: Rng>(rng: &mut R) -> Layout {
    let m = rng.random_range(2..=6);
    let mut dims = vec![1; m];
    let mut total = m;
    for d in dims.iter_mut() {
        if total < 8 && rng.random_bool(0.4) {
            *d = 2;
            total += 1;
        }
    }
    let k = rng.random_range(2..=m.min(4));
    // Cut the macrostate list into k nonempty contiguous groups.
    let mut cuts: Vec<usize> = (1..m).collect();
    while cuts.len() > k - 1 {
        let i = rng.random_range(0..cuts.len());
        cuts.remove(i);
    }
    let mut rewards = Vec::new();
    let mut start = 0;
    for c in cuts.into_iter().chain([m]) {
        rewards.push((start..c).collect());
        start = c;
    }
    Layout {
        macrostate_dims: dims,
        rewards,
    }
}

fn instance(seed: u64) -> QuantumDecisionProblem {
    let mut rng = stream_rng(seed, 0);
    let l = layout(&mut rng);
    random_problem(&mut rng, &l)
}

fn projector_of(p: &QuantumDecisionProblem, e: Event) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(p.dim, p.dim);
    for m in e.members() {
        let b = p.macrostates[m].subspace.basis();
        out += b * b.adjoint();
    }
    out
}

#[test]
fn small_lattices() {
    for (m, expected) in [(2usize, 4usize), (3, 8), (4, 16)] {
        let l = Layout {
            macrostate_dims: vec![1; m],
            rewards: vec![vec![0], (1..m).collect()],
        };
        let p = random_problem(&mut stream_rng(m as u64, 0), &l);
        let events = event_lattice(&p).unwrap();
        assert_eq!(events.len(), expected);
        // Every complement is present.
        for (_, s) in &events {
            let c = s.complement();
            assert!(events.iter().any(|(_, t)| t.approx_eq(&c)));
        }
    }
}

#[test]
fn state_inside_one_macrostate_has_one_branch() {
    let p = instance(5);
    let psi = p.macrostates[1].subspace.basis_vectors()[0].clone();
    let b = branch_decomposition(&p, &psi).unwrap();
    assert_eq!(b.len(), 1);
    assert_eq!(b[0].0, 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_instances_validate(seed in any::<u64>()) {
        prop_assert!(validate_problem(&instance(seed)).is_valid());
    }

    #[test]
    fn reward_projectors_resolve_identity(seed in any::<u64>()) {
        let p = instance(seed);
        let mut sum = DMatrix::<C64>::zeros(p.dim, p.dim);
        for r in 0..p.rewards.len() {
            sum += projector_of(&p, p.reward_event(r));
        }
        let defect = (sum - DMatrix::<C64>::identity(p.dim, p.dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(defect <= 1e-9);
    }

    #[test]
    fn branches_rebuild_the_state(seed in any::<u64>()) {
        let p = instance(seed);
        let psi = random_state(&mut stream_rng(seed, 1), p.dim).scaled(C64::new(0.6, 0.8));
        let branches = branch_decomposition(&p, &psi).unwrap();
        let mut sum = StateVector::zeros(p.dim);
        let mut mass = 0.0;
        for (_, b) in &branches {
            sum = &sum + b;
            mass += b.norm_sqr();
        }
        prop_assert!(sum.distance(&psi) <= 1e-9);
        prop_assert!((mass - psi.norm_sqr()).abs() <= 1e-9);
    }

    #[test]
    fn born_weights_ignore_scale(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.hypot(im) > 1e-3);
        let p = instance(seed);
        let psi = random_state(&mut stream_rng(seed, 2), p.dim);
        let a = born_weights(&p, &psi).unwrap();
        let b = born_weights(&p, &psi.scaled(C64::new(re, im))).unwrap();
        prop_assert!((a.values().sum::<f64>() - 1.0).abs() <= 1e-9);
        for (k, v) in &a {
            prop_assert!((v - b[k]).abs() <= 1e-9);
            // Independent weight: squared norm of the reward projection.
            let r = p.reward_index(k).unwrap();
            let direct = (projector_of(&p, p.reward_event(r)) * psi.as_vector()).norm_squared();
            prop_assert!((v - direct).abs() <= 1e-9);
        }
    }

    #[test]
    fn smallest_event_is_the_lattice_minimum(seed in any::<u64>()) {
        let p = instance(seed);
        let mut rng = stream_rng(seed, 3);
        let n = p.macrostates.len();
        let dom = Event(rng.random_range(1..(1u32 << n)));
        let mut target = Event(rng.random_range(1..(1u32 << n)));
        let dsub = p.event_subspace(dom);
        while p.event_subspace(target).dim() < dsub.dim() {
            target = target.join(Event(rng.random_range(1..(1u32 << n))));
        }
        let u = random_isometry(&mut rng, &dsub, &p.event_subspace(target)).unwrap();
        // Brute force: intersect every lattice event that holds the range.
        let range = u.range_vectors();
        let mut meet = Event((1u32 << n) - 1);
        for mask in 0..(1u32 << n) {
            let proj = projector_of(&p, Event(mask));
            let holds = range.iter().all(|v| (v.as_vector() - &proj * v.as_vector()).norm() <= 1e-9);
            if holds {
                meet = meet.meet(Event(mask));
            }
        }
        prop_assert_eq!(smallest_event(&p, &u), meet);
        prop_assert!(meet.is_subevent_of(target));
    }
}
