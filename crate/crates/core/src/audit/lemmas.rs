use std::cmp::Ordering;

use rand::Rng;

use super::{skippable, AuditReport, AxiomResult, Tally, WitnessBuilder, RADII};
use crate::error::Error;
use crate::forge::ActForge;
use crate::hilbert::{StateVector, Subspace, C64};
use crate::preference::{
    banded, elicit_utility_at, expected_utility, is_null_pair, make_standard_act, nullity_catalog, probe,
    reduce_to_standard, reward_order, standard_weight, NullMethod, PreferenceOracle, UtilityTable,
    DEFAULT_MAX_NULL_PAIRS, EPS_EU, MAX_BISECTION_STEPS,
};
use crate::problem::{reward_weights, AccessibleState, Event, QuantumDecisionProblem};
use crate::sampling::{random_state_in, steer, stream_rng};

/// Tolerance used when the lemma audit elicits utilities.
pub const ELICIT_TOL: f64 = 1e-6;

pub fn check_lemmas(
    p: &QuantumDecisionProblem,
    oracle: &dyn PreferenceOracle,
    u: &UtilityTable,
    samples: usize,
    seed: u64,
) -> AuditReport {
    let results = vec![
        equivalence(p, oracle, samples, seed),
        reward_nondeg(p, oracle),
        nullity(p, oracle, samples, seed),
        dominance(p, oracle, samples, seed),
        utility(p, oracle, u, seed),
        standard_act(p, oracle, u, samples, seed),
        born_theorem(p, oracle, u, samples, seed),
    ];
    AuditReport {
        suite: "lemmas".into(),
        oracle: Some(oracle.name().to_string()),
        seed,
        samples,
        radii: RADII.to_vec(),
        results,
    }
}

fn state_in<R: Rng + ?Sized>(rng: &mut R, p: &QuantumDecisionProblem, m: usize) -> StateVector {
    random_state_in(rng, &p.macrostates[m].subspace).expect("macrostates are nonzero")
}

/// Random reward weights with roughly a third of the rewards left empty.
fn random_reward_weights<R: Rng + ?Sized>(rng: &mut R, p: &QuantumDecisionProblem) -> Vec<f64> {
    let n = p.rewards.len();
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random_bool(0.35) {
                0.0
            } else {
                rng.random_range(0.05..1.0)
            }
        })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.random_range(0..n)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// A unit state with the given reward weights and random directions inside
/// each reward.
fn state_with_weights<R: Rng + ?Sized>(rng: &mut R, p: &QuantumDecisionProblem, w: &[f64]) -> StateVector {
    let mut v = StateVector::zeros(p.dim);
    for (r, &wr) in w.iter().enumerate() {
        if wr > 0.0 {
            let x = random_state_in(rng, &p.reward_subspace(r)).expect("rewards are nonzero");
            v = &v + &x.scaled(C64::new(wr.sqrt(), 0.0));
        }
    }
    v
}

/// A random act at macrostate `m` sending `psi` to `phi`.
fn steered<R: Rng + ?Sized>(
    rng: &mut R,
    p: &QuantumDecisionProblem,
    m: usize,
    psi: &StateVector,
    phi: &StateVector,
) -> crate::error::Result<crate::hilbert::PartialIsometryAct> {
    steer(rng, &p.macrostates[m].subspace, psi, phi, &Subspace::full(p.dim))
}

fn equivalence(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, samples: usize, seed: u64) -> AxiomResult {
    let mut t = Tally::new("Equivalence");
    let mut rng = stream_rng(seed, 21);
    let n = p.macrostates.len();
    for _ in 0..samples.max(1) {
        let (m1, m2) = (rng.random_range(0..n), rng.random_range(0..n));
        let psi1 = state_in(&mut rng, p, m1);
        let psi2 = state_in(&mut rng, p, m2);
        let wu = random_reward_weights(&mut rng, p);
        let wv = random_reward_weights(&mut rng, p);
        let targets = [
            state_with_weights(&mut rng, p, &wu),
            state_with_weights(&mut rng, p, &wu),
            state_with_weights(&mut rng, p, &wv),
            state_with_weights(&mut rng, p, &wv),
        ];
        let built = (|| {
            Ok::<_, Error>((
                steered(&mut rng, p, m1, &psi1, &targets[0])?,
                steered(&mut rng, p, m2, &psi2, &targets[1])?,
                steered(&mut rng, p, m1, &psi1, &targets[2])?,
                steered(&mut rng, p, m2, &psi2, &targets[3])?,
            ))
        })();
        let (u1, u2, v1, v2) = match built {
            Ok(x) => x,
            Err(e) => {
                t.skip(e.to_string());
                continue;
            }
        };
        let verdicts = (oracle.compare(p, &psi1, &u1, &v1), oracle.compare(p, &psi2, &u2, &v2));
        let (o1, o2) = match verdicts {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                t.fail(WitnessBuilder::new(p, format!("oracle refused a comparison: {e}")).build());
                continue;
            }
        };
        t.expect(o1 == o2, || {
            WitnessBuilder::new(p, "matched reward norms, different verdicts")
                .state("psi1", &psi1)
                .state("psi2", &psi2)
                .act("U1", &u1)
                .act("V1", &v1)
                .act("U2", &u2)
                .act("V2", &v2)
                .compare("psi1", "U1", "V1", o1, super::ordering_symbol(o2))
                .compare("psi2", "U2", "V2", o2, super::ordering_symbol(o1))
                .build()
        });
    }
    t.finish()
}

fn reward_nondeg(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle) -> AxiomResult {
    let mut t = Tally::new("RewardNonDeg");
    match reward_order(p, oracle) {
        Ok(order) => {
            let (r0, r1) = (p.r0(), p.r1());
            let o = order.relation[r1][r0];
            t.expect(o == Ordering::Greater, || {
                let (m, psi) = probe(p);
                let mut forge = ActForge::new(p);
                let mut w = WitnessBuilder::new(p, "the r1 reward act is not strictly preferred to the r0 one")
                    .state("psi", &psi);
                if let (Ok(a), Ok(b)) = (forge.reward_act(m, r1), ActForge::new(p).reward_act(m, r0)) {
                    w = w
                        .act("to_r1", &a)
                        .act("to_r0", &b)
                        .compare("psi", "to_r1", "to_r0", o, ">");
                }
                w.build()
            });
        }
        Err(e) if skippable(&e) => t.skip(e.to_string()),
        Err(e) => t.fail(WitnessBuilder::new(p, e.to_string()).build()),
    }
    t.finish()
}

fn nullity(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, samples: usize, seed: u64) -> AxiomResult {
    let mut t = Tally::new("Nullity");
    let mut rng = stream_rng(seed, 23);
    let n = p.macrostates.len();
    let states = (samples / 20).max(2);
    for s in 0..states {
        let m = s % n;
        let dim = p.macrostates[m].subspace.dim();
        let mut room = None;
        for _ in 0..16 {
            let e = Event(rng.random_range(1..=p.full_event().0));
            if p.event_subspace(e).dim() >= dim {
                room = Some(e);
                break;
            }
        }
        let Some(room) = room else {
            t.skip(format!("no event can host macrostate `{}`", p.macrostates[m].id));
            continue;
        };
        // Leave some branches of the reached state empty so both verdicts occur.
        let members: Vec<usize> = room.members().collect();
        let support = Event::from_members(members.iter().copied().filter(|_| rng.random_bool(0.6)));
        let support = if support.is_empty() {
            Event::single(members[0])
        } else {
            support
        };
        let psi = state_in(&mut rng, p, m);
        let target = random_state_in(&mut rng, &p.event_subspace(support)).expect("nonzero event");
        let witness = match steer(
            &mut rng,
            &p.macrostates[m].subspace,
            &psi,
            &target,
            &p.event_subspace(room),
        ) {
            Ok(w) => w,
            Err(e) => {
                t.skip(e.to_string());
                continue;
            }
        };
        let phi = AccessibleState::new(p, psi.clone(), witness).expect("witness is available at its source");
        let catalog = match nullity_catalog(p, &phi) {
            Ok(c) => c,
            Err(e) if skippable(&e) => {
                t.skip(e.to_string());
                continue;
            }
            Err(e) => {
                t.fail(WitnessBuilder::new(p, e.to_string()).build());
                continue;
            }
        };
        let events: Vec<Event> = if n <= 10 {
            (1..1u32 << n).map(Event).collect()
        } else {
            (0..64).map(|_| Event(rng.random_range(1..=p.full_event().0))).collect()
        };
        for e in events {
            let crit = is_null_pair(p, e, &phi, NullMethod::Criterion, oracle, None, DEFAULT_MAX_NULL_PAIRS);
            let defn = is_null_pair(
                p,
                e,
                &phi,
                NullMethod::Definitional,
                oracle,
                Some(&catalog),
                DEFAULT_MAX_NULL_PAIRS,
            );
            match (crit, defn) {
                (Ok(a), Ok(b)) => t.expect(a == b, || {
                    let name = e
                        .members()
                        .map(|i| p.macrostates[i].id.as_str())
                        .collect::<Vec<_>>()
                        .join("+");
                    let weight = p
                        .event_subspace(e)
                        .project(&phi.state)
                        .map(|v| v.norm_sqr())
                        .unwrap_or(f64::NAN);
                    WitnessBuilder::new(
                        p,
                        format!("event {name}: projection test says {a}, indifference test says {b}"),
                    )
                    .state("psi", &psi)
                    .state("phi", &phi.state)
                    .act("witness", &phi.witness_act)
                    .margin("event_weight", weight)
                    .build()
                }),
                (Err(err), _) | (_, Err(err)) if skippable(&err) => t.skip(err.to_string()),
                (Err(err), _) | (_, Err(err)) => t.fail(WitnessBuilder::new(p, err.to_string()).build()),
            }
        }
    }
    t.finish()
}

fn dominance(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, samples: usize, seed: u64) -> AxiomResult {
    let mut t = Tally::new("Dominance");
    let mut rng = stream_rng(seed, 24);
    let n = p.macrostates.len();
    for s in 0..samples.max(1) {
        let m = s % n;
        let psi = state_in(&mut rng, p, m);
        let alpha: f64 = rng.random_range(1e-6..=1.0);
        let (alpha, beta, required) = if s % 4 == 3 {
            (alpha, alpha, Ordering::Equal)
        } else {
            let gap = rng.random_range(1e-6..=alpha);
            (alpha, (alpha - gap).max(0.0), Ordering::Greater)
        };
        let acts = make_standard_act(p, &psi, alpha).and_then(|a| Ok((a, make_standard_act(p, &psi, beta)?)));
        let (va, vb) = match acts {
            Ok(x) => x,
            Err(e) if skippable(&e) => {
                t.skip(e.to_string());
                continue;
            }
            Err(e) => {
                t.fail(WitnessBuilder::new(p, e.to_string()).build());
                continue;
            }
        };
        match oracle.compare(p, &psi, &va, &vb) {
            Ok(o) => t.expect(o == required, || {
                WitnessBuilder::new(p, format!("standard acts of weights {alpha} and {beta}"))
                    .state("psi", &psi)
                    .act("V_alpha", &va)
                    .act("V_beta", &vb)
                    .compare("psi", "V_alpha", "V_beta", o, super::ordering_symbol(required))
                    .margin("alpha", alpha)
                    .margin("beta", beta)
                    .build()
            }),
            Err(e) => t.fail(WitnessBuilder::new(p, e.to_string()).build()),
        }
    }
    t.finish()
}

fn utility(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, u: &UtilityTable, seed: u64) -> AxiomResult {
    let mut t = Tally::new("Utility");
    let mut rng = stream_rng(seed, 25);
    let (m, psi) = probe(p);
    let first = elicit_utility_at(p, oracle, ELICIT_TOL, m, &psi);
    let other = state_in(&mut rng, p, m);
    let second = elicit_utility_at(p, oracle, ELICIT_TOL, m, &other);
    let ((e1, stats), (e2, _)) = match (first, second) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) if skippable(&e) => {
            t.skip(e.to_string());
            return t.finish();
        }
        (Err(e), _) | (_, Err(e)) => {
            t.fail(
                WitnessBuilder::new(p, format!("elicitation failed: {e}"))
                    .state("probe", &psi)
                    .build(),
            );
            return t.finish();
        }
    };
    for reward in &p.rewards {
        let id = reward.id.as_str();
        let (a, b) = (e1.get(id).unwrap_or(f64::NAN), e2.get(id).unwrap_or(f64::NAN));
        let planted = u.get(id).unwrap_or(f64::NAN);
        let steps = stats.steps.get(id).copied().unwrap_or(usize::MAX);
        t.expect(
            (a - planted).abs() <= ELICIT_TOL && steps <= MAX_BISECTION_STEPS,
            || {
                WitnessBuilder::new(p, format!("elicited u({id}) misses the table"))
                    .state("probe", &psi)
                    .margin("elicited", a)
                    .margin("table", planted)
                    .build()
            },
        );
        t.expect((a - b).abs() <= 2.0 * ELICIT_TOL, || {
            WitnessBuilder::new(p, format!("two elicitations of u({id}) disagree"))
                .state("probe", &psi)
                .state("second_probe", &other)
                .margin("first", a)
                .margin("second", b)
                .build()
        });
    }
    let acts: Vec<_> = (0..p.rewards.len())
        .map(|r| ActForge::new(p).reward_act(m, r))
        .collect();
    for a in 0..p.rewards.len() {
        for b in 0..p.rewards.len() {
            let (ua, ub) = (
                e1.get(&p.rewards[a].id).unwrap_or(f64::NAN),
                e1.get(&p.rewards[b].id).unwrap_or(f64::NAN),
            );
            if !(ua > ub + ELICIT_TOL) {
                continue;
            }
            let (Ok(ra), Ok(rb)) = (&acts[a], &acts[b]) else {
                t.skip("reward acts unavailable at the probe");
                continue;
            };
            match oracle.compare(p, &psi, ra, rb) {
                Ok(o) => t.expect(o == Ordering::Greater, || {
                    WitnessBuilder::new(
                        p,
                        format!(
                            "u({}) > u({}) but the reward acts disagree",
                            p.rewards[a].id, p.rewards[b].id
                        ),
                    )
                    .state("psi", &psi)
                    .act("to_a", ra)
                    .act("to_b", rb)
                    .compare("psi", "to_a", "to_b", o, ">")
                    .build()
                }),
                Err(e) => t.fail(WitnessBuilder::new(p, e.to_string()).build()),
            }
        }
    }
    t.finish()
}

fn standard_act(
    p: &QuantumDecisionProblem,
    oracle: &dyn PreferenceOracle,
    u: &UtilityTable,
    samples: usize,
    seed: u64,
) -> AxiomResult {
    let mut t = Tally::new("StandardAct");
    let mut rng = stream_rng(seed, 26);
    let n = p.macrostates.len();
    for s in 0..samples.max(1) {
        let m = s % n;
        let psi = state_in(&mut rng, p, m);
        let w = random_reward_weights(&mut rng, p);
        let phi = state_with_weights(&mut rng, p, &w);
        let act = match steered(&mut rng, p, m, &psi, &phi) {
            Ok(a) => a,
            Err(e) => {
                t.skip(e.to_string());
                continue;
            }
        };
        let reduced = match reduce_to_standard(p, &psi, &act, u) {
            Ok(r) => r,
            Err(e) if skippable(&e) => {
                t.skip(e.to_string());
                continue;
            }
            Err(e) => {
                t.fail(
                    WitnessBuilder::new(p, e.to_string())
                        .state("psi", &psi)
                        .act("U", &act)
                        .build(),
                );
                continue;
            }
        };
        let numbers = (|| {
            let eu = expected_utility(p, &psi, &act, u)?;
            let weight = standard_weight(p, &psi, &reduced)?;
            let image = reduced.apply(&psi)?;
            let weights = reward_weights(p, &image)?;
            Ok::<_, Error>((eu, weight, 1.0 - weights[p.r0()] - weights[p.r1()]))
        })();
        let (eu, weight, stray) = match numbers {
            Ok(x) => x,
            Err(e) => {
                t.fail(WitnessBuilder::new(p, e.to_string()).build());
                continue;
            }
        };
        let verdict = oracle.compare(p, &psi, &act, &reduced);
        let o = match verdict {
            Ok(o) => o,
            Err(e) => {
                t.fail(WitnessBuilder::new(p, e.to_string()).build());
                continue;
            }
        };
        t.expect(
            (weight - eu).abs() <= 1e-9 && stray.abs() <= 1e-9 && o == Ordering::Equal,
            || {
                WitnessBuilder::new(p, "reduction is not a standard act of the expected weight")
                    .state("psi", &psi)
                    .act("U", &act)
                    .act("standard", &reduced)
                    .compare("psi", "U", "standard", o, "~")
                    .margin("expected_utility", eu)
                    .margin("standard_weight", weight)
                    .margin("weight_outside_extremes", stray)
                    .build()
            },
        );
    }
    t.finish()
}

fn born_theorem(
    p: &QuantumDecisionProblem,
    oracle: &dyn PreferenceOracle,
    u: &UtilityTable,
    samples: usize,
    seed: u64,
) -> AxiomResult {
    let mut t = Tally::new("BornTheorem");
    let mut rng = stream_rng(seed, 27);
    let n = p.macrostates.len();
    for s in 0..samples.max(1) {
        let m = s % n;
        let psi = state_in(&mut rng, p, m);
        let wu = random_reward_weights(&mut rng, p);
        let wv = if s % 5 == 4 {
            wu.clone()
        } else {
            random_reward_weights(&mut rng, p)
        };
        let (phi, chi) = (
            state_with_weights(&mut rng, p, &wu),
            state_with_weights(&mut rng, p, &wv),
        );
        let acts = steered(&mut rng, p, m, &psi, &phi).and_then(|a| Ok((a, steered(&mut rng, p, m, &psi, &chi)?)));
        let (a, b) = match acts {
            Ok(x) => x,
            Err(e) => {
                t.skip(e.to_string());
                continue;
            }
        };
        let result = (|| {
            let diff = expected_utility(p, &psi, &a, u)? - expected_utility(p, &psi, &b, u)?;
            Ok::<_, Error>((diff, oracle.compare(p, &psi, &a, &b)?))
        })();
        match result {
            Ok((diff, o)) => {
                let required = banded(diff, 0.0, EPS_EU);
                t.expect(o == required, || {
                    WitnessBuilder::new(p, "verdict disagrees with the expected utility difference")
                        .state("psi", &psi)
                        .act("U", &a)
                        .act("V", &b)
                        .compare("psi", "U", "V", o, super::ordering_symbol(required))
                        .margin("eu_difference", diff)
                        .build()
                });
            }
            Err(e) => t.fail(WitnessBuilder::new(p, e.to_string()).build()),
        }
    }
    t.finish()
}
