use std::cmp::Ordering;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::catalog::{macrostate_catalog, CatalogEntry};
use super::{skippable, AuditReport, AxiomResult, Tally, WitnessBuilder, RADII};
use crate::error::Error;
use crate::forge::{compose_acts, identity_act, ActForge};
use crate::hilbert::{PartialIsometryAct, StateVector, Subspace, EPS_ORTH};
use crate::preference::PreferenceOracle;
use crate::problem::{AccessibleState, Event, QuantumDecisionProblem};
use crate::sampling::{perturb, random_isometry, random_state_in, steer, stream_rng};

pub fn audit_rationality(
    p: &QuantumDecisionProblem,
    oracle: &dyn PreferenceOracle,
    samples: usize,
    seed: u64,
) -> AuditReport {
    let results = vec![
        ord(p, oracle, samples, seed),
        act_ndeg(p, oracle),
        br_indif(p, oracle, samples, seed),
        er_indif(p, oracle, samples, seed),
        re_sup(p, oracle, samples, seed),
        sta_sup(p, oracle, samples, seed),
        mac_indif(p, oracle, samples, seed),
        diac_cons(p, oracle, samples, seed),
        br_cons(p, oracle, samples, seed),
        sol_cont(p, oracle, samples, seed),
    ];
    AuditReport {
        suite: "rationality".into(),
        oracle: Some(oracle.name().to_string()),
        seed,
        samples,
        radii: RADII.to_vec(),
        results,
    }
}

/// Asks the oracle, turning errors into a skip or a failure.
fn ask(
    t: &mut Tally,
    p: &QuantumDecisionProblem,
    oracle: &dyn PreferenceOracle,
    psi: &StateVector,
    left: &PartialIsometryAct,
    right: &PartialIsometryAct,
) -> Option<Ordering> {
    match oracle.compare(p, psi, left, right) {
        Ok(o) => Some(o),
        Err(e) if skippable(&e) => {
            t.skip(e.to_string());
            None
        }
        Err(e) => {
            t.fail(
                WitnessBuilder::new(p, format!("oracle refused a comparison: {e}"))
                    .state("psi", psi)
                    .act("left", left)
                    .act("right", right)
                    .build(),
            );
            None
        }
    }
}

fn state_in<R: Rng + ?Sized>(rng: &mut R, p: &QuantumDecisionProblem, m: usize) -> StateVector {
    random_state_in(rng, &p.macrostates[m].subspace).expect("macrostates are nonzero")
}

fn ord(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, samples: usize, seed: u64) -> AxiomResult {
    let mut t = Tally::new("Ord");
    let mut rng = stream_rng(seed, 11);
    let n = p.macrostates.len();
    let per = (samples / (10 * n).max(1)).clamp(1, 5);
    for m in 0..n {
        for _ in 0..per {
            let psi = state_in(&mut rng, p, m);
            let acts = macrostate_catalog(p, m, &psi);
            let k = acts.len();
            let mut rel = vec![vec![Ordering::Equal; k]; k];
            let mut complete = true;
            for i in 0..k {
                for j in 0..k {
                    match ask(&mut t, p, oracle, &psi, &acts[i].act, &acts[j].act) {
                        Some(o) => rel[i][j] = o,
                        None => complete = false,
                    }
                }
            }
            if !complete {
                continue;
            }
            let pair = |i: usize, j: usize| {
                WitnessBuilder::new(
                    p,
                    format!("{} and {} are compared inconsistently", acts[i].label, acts[j].label),
                )
                .state("psi", &psi)
                .act(&acts[i].label, &acts[i].act)
                .act(&acts[j].label, &acts[j].act)
                .compare(
                    "psi",
                    &acts[i].label,
                    &acts[j].label,
                    rel[i][j],
                    "reverse of the swapped verdict",
                )
                .compare(
                    "psi",
                    &acts[j].label,
                    &acts[i].label,
                    rel[j][i],
                    "reverse of the swapped verdict",
                )
                .build()
            };
            for i in 0..k {
                t.expect(rel[i][i] == Ordering::Equal, || pair(i, i));
                for j in i + 1..k {
                    t.expect(rel[i][j] == rel[j][i].reverse(), || pair(i, j));
                }
            }
            for a in 0..k {
                for b in 0..k {
                    if rel[a][b] == Ordering::Less {
                        continue;
                    }
                    for c in 0..k {
                        if rel[b][c] == Ordering::Less || rel[a][c] != Ordering::Less {
                            continue;
                        }
                        t.fail(
                            WitnessBuilder::new(
                                p,
                                format!(
                                    "cycle: {} >= {} >= {} but {} < {}",
                                    acts[a].label, acts[b].label, acts[c].label, acts[a].label, acts[c].label
                                ),
                            )
                            .state("psi", &psi)
                            .act(&acts[a].label, &acts[a].act)
                            .act(&acts[b].label, &acts[b].act)
                            .act(&acts[c].label, &acts[c].act)
                            .compare("psi", &acts[a].label, &acts[b].label, rel[a][b], ">=")
                            .compare("psi", &acts[b].label, &acts[c].label, rel[b][c], ">=")
                            .compare("psi", &acts[a].label, &acts[c].label, rel[a][c], ">=")
                            .build(),
                        );
                    }
                    t.pass();
                }
            }
        }
    }
    t.finish()
}

fn act_ndeg(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle) -> AxiomResult {
    let mut t = Tally::new("ActNDeg");
    let mut tried = None;
    for m in 0..p.macrostates.len() {
        let (_, psi) = crate::preference::probe_at(p, m);
        let acts = macrostate_catalog(p, m, &psi);
        for a in &acts {
            for b in &acts {
                match ask(&mut t, p, oracle, &psi, &a.act, &b.act) {
                    Some(Ordering::Greater) => {
                        t.pass();
                        return t.finish();
                    }
                    Some(o) if tried.is_none() => tried = Some((psi.clone(), a.clone(), b.clone(), o)),
                    _ => {}
                }
            }
        }
    }
    let mut w = WitnessBuilder::new(p, "no strict preference anywhere in the catalog");
    if let Some((psi, a, b, o)) = &tried {
        w = w
            .state("psi", psi)
            .act(&a.label, &a.act)
            .act(&b.label, &b.act)
            .compare("psi", &a.label, &b.label, *o, ">");
    }
    t.fail(w.build());
    t.finish()
}

/// Checks `U ~ 1_M` at `psi`.
fn indifferent_to_identity(
    t: &mut Tally,
    p: &QuantumDecisionProblem,
    oracle: &dyn PreferenceOracle,
    m: usize,
    psi: &StateVector,
    label: &str,
    u: &PartialIsometryAct,
) {
    let id = identity_act(&p.macrostates[m].subspace).expect("macrostates are nonzero");
    if let Some(o) = ask(t, p, oracle, psi, u, &id) {
        t.expect(o == Ordering::Equal, || {
            WitnessBuilder::new(
                p,
                format!(
                    "{label} is not indifferent to doing nothing at `{}`",
                    p.macrostates[m].id
                ),
            )
            .state("psi", psi)
            .act(label, u)
            .act("identity", &id)
            .compare("psi", label, "identity", o, "~")
            .build()
        });
    }
}

fn br_indif(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, samples: usize, seed: u64) -> AxiomResult {
    let mut t = Tally::new("BrIndif");
    let mut rng = stream_rng(seed, 12);
    let n = p.macrostates.len();
    for s in 0..samples.max(1) {
        let m = s % n;
        let members = p.rewards[p.reward_of(m)].members.len();
        let k = rng.random_range(1..=members.min(3));
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let head: f64 = weights[..k - 1].iter().sum();
        weights[k - 1] = 1.0 - head;
        let psi = state_in(&mut rng, p, m);
        match ActForge::new(p).branching_act(&psi, &weights, None) {
            Ok(u) => indifferent_to_identity(&mut t, p, oracle, m, &psi, "branching", &u),
            Err(e) if skippable(&e) => t.skip(e.to_string()),
            Err(e) => t.fail(WitnessBuilder::new(p, e.to_string()).build()),
        }
    }
    t.finish()
}

fn er_indif(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, samples: usize, seed: u64) -> AxiomResult {
    let mut t = Tally::new("ErIndif");
    let mut rng = stream_rng(seed, 13);
    for _ in 0..samples.max(1) {
        let r = rng.random_range(0..p.rewards.len());
        let members = &p.rewards[r].members;
        let a = *members.choose(&mut rng).expect("rewards are nonempty");
        let b = *members.choose(&mut rng).expect("rewards are nonempty");
        let psi1 = state_in(&mut rng, p, a);
        let psi2 = state_in(&mut rng, p, b);
        match ActForge::new(p).erasure_pair(&psi1, &psi2) {
            Ok((u1, u2)) => {
                indifferent_to_identity(&mut t, p, oracle, a, &psi1, "erasure1", &u1);
                indifferent_to_identity(&mut t, p, oracle, b, &psi2, "erasure2", &u2);
            }
            Err(e) if skippable(&e) => t.skip(e.to_string()),
            Err(e) => t.fail(WitnessBuilder::new(p, e.to_string()).build()),
        }
    }
    t.finish()
}

fn re_sup(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, samples: usize, seed: u64) -> AxiomResult {
    let mut t = Tally::new("ReSup");
    let mut rng = stream_rng(seed, 14);
    let n = p.macrostates.len();
    for s in 0..samples.max(1) {
        let m = s % n;
        let psi = state_in(&mut rng, p, m);
        let reward = p.reward_subspace(p.reward_of(m));
        match random_isometry(&mut rng, &p.macrostates[m].subspace, &reward) {
            Ok(u) => indifferent_to_identity(&mut t, p, oracle, m, &psi, "reward_preserving", &u),
            Err(e) => t.skip(e.to_string()),
        }
    }
    t.finish()
}

/// A random final state: a random unit vector in a random nonempty event.
fn random_final<R: Rng + ?Sized>(rng: &mut R, p: &QuantumDecisionProblem) -> StateVector {
    let e = Event(rng.random_range(1..=p.full_event().0));
    random_state_in(rng, &p.event_subspace(e)).expect("nonzero event")
}

fn sta_sup(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, samples: usize, seed: u64) -> AxiomResult {
    let mut t = Tally::new("StaSup");
    let mut rng = stream_rng(seed, 15);
    let n = p.macrostates.len();
    let full = Subspace::full(p.dim);
    for _ in 0..samples.max(1) {
        let (m1, m2) = (rng.random_range(0..n), rng.random_range(0..n));
        let psi1 = state_in(&mut rng, p, m1);
        let psi2 = state_in(&mut rng, p, m2);
        let phi = random_final(&mut rng, p);
        let chi = if rng.random_bool(0.2) {
            phi.clone()
        } else {
            random_final(&mut rng, p)
        };
        let built = (|| {
            let u1 = steer(&mut rng, &p.macrostates[m1].subspace, &psi1, &phi, &full)?;
            let u2 = steer(&mut rng, &p.macrostates[m2].subspace, &psi2, &phi, &full)?;
            let v1 = steer(&mut rng, &p.macrostates[m1].subspace, &psi1, &chi, &full)?;
            let v2 = steer(&mut rng, &p.macrostates[m2].subspace, &psi2, &chi, &full)?;
            Ok::<_, Error>((u1, u2, v1, v2))
        })();
        let (u1, u2, v1, v2) = match built {
            Ok(x) => x,
            Err(e) => {
                t.skip(e.to_string());
                continue;
            }
        };
        let (Some(o1), Some(o2)) = (
            ask(&mut t, p, oracle, &psi1, &u1, &v1),
            ask(&mut t, p, oracle, &psi2, &u2, &v2),
        ) else {
            continue;
        };
        t.expect(o1 == o2, || {
            WitnessBuilder::new(p, "same final states, different verdicts")
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
        if phi == chi || phi.distance(&chi) <= EPS_ORTH {
            t.expect(o1 == Ordering::Equal, || {
                WitnessBuilder::new(p, "acts with the same final state are not indifferent")
                    .state("psi1", &psi1)
                    .act("U1", &u1)
                    .act("V1", &v1)
                    .compare("psi1", "U1", "V1", o1, "~")
                    .build()
            });
        }
    }
    t.finish()
}

fn mac_indif(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, samples: usize, seed: u64) -> AxiomResult {
    let mut t = Tally::new("MacIndif");
    let mut rng = stream_rng(seed, 16);
    let n = p.macrostates.len();
    for _ in 0..samples.max(1) {
        let (m1, m2) = (rng.random_range(0..n), rng.random_range(0..n));
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let psi1 = state_in(&mut rng, p, m1);
        let psi2 = state_in(&mut rng, p, m2);
        let sub = |i: usize| &p.macrostates[i].subspace;
        let built = (|| {
            Ok::<_, Error>((
                random_isometry(&mut rng, sub(m1), sub(a))?,
                random_isometry(&mut rng, sub(m1), sub(b))?,
                random_isometry(&mut rng, sub(m2), sub(a))?,
                random_isometry(&mut rng, sub(m2), sub(b))?,
            ))
        })();
        let (u1, v1, u2, v2) = match built {
            Ok(x) => x,
            Err(e) => {
                t.skip(e.to_string());
                continue;
            }
        };
        let (Some(o1), Some(o2)) = (
            ask(&mut t, p, oracle, &psi1, &u1, &v1),
            ask(&mut t, p, oracle, &psi2, &u2, &v2),
        ) else {
            continue;
        };
        t.expect((o1 != Ordering::Less) == (o2 != Ordering::Less), || {
            WitnessBuilder::new(
                p,
                format!(
                    "acts into `{}` and `{}` are ranked differently from different starting points",
                    p.macrostates[a].id, p.macrostates[b].id
                ),
            )
            .state("psi1", &psi1)
            .state("psi2", &psi2)
            .act("U1", &u1)
            .act("V1", &v1)
            .act("U2", &u2)
            .act("V2", &v2)
            .compare("psi1", "U1", "V1", o1, "same weak verdict as at psi2")
            .compare("psi2", "U2", "V2", o2, "same weak verdict as at psi1")
            .build()
        });
    }
    t.finish()
}

fn diac_cons(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, samples: usize, seed: u64) -> AxiomResult {
    let mut t = Tally::new("DiacCons");
    let mut rng = stream_rng(seed, 17);
    let n = p.macrostates.len();
    let per = (samples / n.max(1)).max(1);
    for m in 0..n {
        let dim = p.macrostates[m].subspace.dim();
        let hosts: Vec<usize> = (0..n).filter(|&k| p.macrostates[k].subspace.dim() >= dim).collect();
        for _ in 0..per {
            let target = *hosts.choose(&mut rng).expect("m hosts itself");
            let room = &p.macrostates[target].subspace;
            let psi = state_in(&mut rng, p, m);
            let phi = state_in(&mut rng, p, target);
            let u = match steer(&mut rng, &p.macrostates[m].subspace, &psi, &phi, room) {
                Ok(u) => u,
                Err(e) => {
                    t.skip(e.to_string());
                    continue;
                }
            };
            let acts = macrostate_catalog(p, target, &phi);
            let mut pairs: Vec<(usize, usize)> = (0..acts.len())
                .flat_map(|i| (0..acts.len()).filter(move |&j| j != i).map(move |j| (i, j)))
                .collect();
            let pairs: Vec<(usize, usize)> = if pairs.len() > 8 {
                pairs.choose_multiple(&mut rng, 8).copied().collect()
            } else {
                std::mem::take(&mut pairs)
            };
            for (i, j) in pairs {
                let (v, v2) = (&acts[i], &acts[j]);
                let Some(later) = ask(&mut t, p, oracle, &phi, &v.act, &v2.act) else {
                    continue;
                };
                if later != Ordering::Greater {
                    continue;
                }
                let (vu, v2u) = match (compose_acts(p, &v.act, &u), compose_acts(p, &v2.act, &u)) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(e), _) | (_, Err(e)) => {
                        t.fail(WitnessBuilder::new(p, format!("composition unavailable: {e}")).build());
                        continue;
                    }
                };
                let Some(now) = ask(&mut t, p, oracle, &psi, &vu, &v2u) else {
                    continue;
                };
                t.expect(now == Ordering::Greater, || {
                    WitnessBuilder::new(
                        p,
                        format!("{} > {} after the first act but not before", v.label, v2.label),
                    )
                    .state("psi", &psi)
                    .state("phi", &phi)
                    .act(&v.label, &v.act)
                    .act(&v2.label, &v2.act)
                    .act("VU", &vu)
                    .act("V'U", &v2u)
                    .compare("phi", &v.label, &v2.label, later, ">")
                    .compare("psi", "VU", "V'U", now, ">")
                    .build()
                });
            }
        }
    }
    t.finish()
}

fn random_event_with<R: Rng + ?Sized>(rng: &mut R, p: &QuantumDecisionProblem, need: usize) -> Option<Event> {
    let n = p.macrostates.len();
    for _ in 0..16 {
        let size = rng.random_range(2..=n.clamp(2, 3)).min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        let (chosen, _) = idx.partial_shuffle(rng, size);
        let e = Event::from_members(chosen.iter().copied());
        if p.event_subspace(e).dim() >= need {
            return Some(e);
        }
    }
    None
}

/// Target events for each block of `blocks`, pairwise disjoint, so an act
/// sending every block into its own target never recoheres branches.
fn disjoint_targets<R: Rng + ?Sized>(
    rng: &mut R,
    p: &QuantumDecisionProblem,
    blocks: Event,
) -> Option<Vec<(usize, Subspace)>> {
    let mut free: Vec<usize> = (0..p.macrostates.len()).collect();
    free.shuffle(rng);
    let dim = |m: usize| p.macrostates[m].subspace.dim();
    let mut order: Vec<usize> = blocks.members().collect();
    order.sort_by_key(|&i| std::cmp::Reverse(dim(i)));
    let mut out = Vec::new();
    for i in order {
        let need = dim(i);
        let mut taken = Vec::new();
        if let Some(pos) = free.iter().position(|&m| dim(m) >= need) {
            taken.push(free.remove(pos));
        } else {
            let mut have = 0;
            while have < need {
                let m = free.pop()?;
                have += dim(m);
                taken.push(m);
            }
        }
        if !free.is_empty() && rng.random_bool(0.3) {
            taken.push(free.pop().expect("nonempty"));
        }
        out.push((i, p.event_subspace(Event::from_members(taken))));
    }
    Some(out)
}

fn assemble<R: Rng + ?Sized>(
    rng: &mut R,
    p: &QuantumDecisionProblem,
    targets: &[(usize, Subspace)],
    domain: &Subspace,
    keep: Option<&PartialIsometryAct>,
) -> Option<PartialIsometryAct> {
    let mut op = nalgebra::DMatrix::zeros(p.dim, p.dim);
    for (i, target) in targets {
        let sub = &p.macrostates[*i].subspace;
        match keep {
            Some(v) if rng.random_bool(0.5) => op += v.restrict(sub).ok()?.operator(),
            _ => op += random_isometry(rng, sub, target).ok()?.operator(),
        }
    }
    PartialIsometryAct::from_operator(domain.clone(), &op).ok()
}

fn br_cons(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, samples: usize, seed: u64) -> AxiomResult {
    let mut t = Tally::new("BrCons");
    let mut rng = stream_rng(seed, 18);
    let n = p.macrostates.len();
    if n < 2 {
        t.skip("fewer than two macrostates");
        return t.finish();
    }
    for s in 0..samples.max(1) {
        let m = s % n;
        let dim = p.macrostates[m].subspace.dim();
        let Some(event) = random_event_with(&mut rng, p, dim) else {
            t.skip(format!("no event can host macrostate `{}`", p.macrostates[m].id));
            continue;
        };
        let e = p.event_subspace(event);
        let psi = state_in(&mut rng, p, m);
        let target = random_state_in(&mut rng, &e).expect("nonzero event");
        let witness = match steer(&mut rng, &p.macrostates[m].subspace, &psi, &target, &e) {
            Ok(w) => w,
            Err(err) => {
                t.skip(err.to_string());
                continue;
            }
        };
        let phi = AccessibleState::new(p, psi.clone(), witness).expect("witness is available at its source");
        let reach = crate::problem::smallest_event(p, &phi.witness_act);
        let domain = p.event_subspace(reach);
        let Some(targets) = disjoint_targets(&mut rng, p, reach) else {
            t.skip("no room for blockwise acts with disjoint targets");
            continue;
        };
        let Some(v) = assemble(&mut rng, p, &targets, &domain, None) else {
            t.skip("no room for blockwise acts with disjoint targets");
            continue;
        };
        let Some(v2) = assemble(&mut rng, p, &targets, &domain, Some(&v)) else {
            t.skip("no room for blockwise acts with disjoint targets");
            continue;
        };
        let mut all_weak = true;
        let mut some_strict = false;
        let mut verdicts = Vec::new();
        let mut failed = false;
        for i in reach.members() {
            let sub = &p.macrostates[i].subspace;
            let branch = sub.project(&phi.state).expect("dimensions agree");
            let non_null = branch.norm() > EPS_ORTH;
            if !non_null {
                continue;
            }
            let (vi, v2i) = (v.restrict(sub).expect("subevent"), v2.restrict(sub).expect("subevent"));
            let Some(o) = ask(&mut t, p, oracle, &branch, &vi, &v2i) else {
                failed = true;
                break;
            };
            all_weak &= o != Ordering::Less;
            some_strict |= o == Ordering::Greater;
            verdicts.push((i, branch, vi, v2i, o));
        }
        if failed || !all_weak {
            continue;
        }
        let (vw, v2w) = match (
            compose_acts(p, &v, &phi.witness_act),
            compose_acts(p, &v2, &phi.witness_act),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(err), _) | (_, Err(err)) => {
                t.fail(WitnessBuilder::new(p, format!("composition unavailable: {err}")).build());
                continue;
            }
        };
        let Some(whole) = ask(&mut t, p, oracle, &psi, &vw, &v2w) else {
            continue;
        };
        let required = if some_strict {
            Ordering::Greater
        } else {
            Ordering::Equal
        };
        let ok = if some_strict {
            whole == Ordering::Greater
        } else {
            whole != Ordering::Less
        };
        t.expect(ok, || {
            let mut w = WitnessBuilder::new(p, "every branch weakly prefers V but the branched state does not")
                .state("psi", &psi)
                .act("VW", &vw)
                .act("V'W", &v2w);
            for (i, branch, vi, v2i, o) in &verdicts {
                let id = &p.macrostates[*i].id;
                w = w
                    .state(&format!("branch_{id}"), branch)
                    .act(&format!("V|{id}"), vi)
                    .act(&format!("V'|{id}"), v2i)
                    .compare(
                        &format!("branch_{id}"),
                        &format!("V|{id}"),
                        &format!("V'|{id}"),
                        *o,
                        ">=",
                    );
            }
            w.compare(
                "psi",
                "VW",
                "V'W",
                whole,
                if required == Ordering::Greater { ">" } else { ">=" },
            )
            .build()
        });
    }
    t.finish()
}

fn sol_cont(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, samples: usize, seed: u64) -> AxiomResult {
    let mut t = Tally::new("SolCont");
    let mut rng = stream_rng(seed, 19);
    let n = p.macrostates.len();
    let mut strict: Vec<(StateVector, CatalogEntry, CatalogEntry)> = Vec::new();
    for m in 0..n {
        let psi = state_in(&mut rng, p, m);
        let acts = macrostate_catalog(p, m, &psi);
        for a in &acts {
            for b in &acts {
                if let Some(Ordering::Greater) = ask(&mut t, p, oracle, &psi, &a.act, &b.act) {
                    strict.push((psi.clone(), a.clone(), b.clone()));
                }
            }
        }
    }
    if strict.len() > samples.max(1) {
        strict = strict.choose_multiple(&mut rng, samples.max(1)).cloned().collect();
    }
    for (psi, u, v) in strict {
        let mut survived = false;
        let mut first = None;
        for radius in RADII {
            let (Ok(u2), Ok(v2)) = (perturb(&mut rng, &u.act, radius), perturb(&mut rng, &v.act, radius)) else {
                continue;
            };
            match ask(&mut t, p, oracle, &psi, &u2, &v2) {
                Some(Ordering::Greater) => survived = true,
                Some(o) if first.is_none() => first = Some((radius, u2, v2, o)),
                _ => {}
            }
        }
        t.expect(survived, || {
            let mut w = WitnessBuilder::new(
                p,
                format!("{} > {} is lost under every sampled perturbation", u.label, v.label),
            )
            .state("psi", &psi)
            .act(&u.label, &u.act)
            .act(&v.label, &v.act)
            .compare("psi", &u.label, &v.label, Ordering::Greater, ">");
            if let Some((radius, u2, v2, o)) = &first {
                w = w
                    .act("U'", u2)
                    .act("V'", v2)
                    .compare("psi", "U'", "V'", *o, ">")
                    .margin("radius", *radius);
            }
            w.build()
        });
    }
    t.finish()
}
