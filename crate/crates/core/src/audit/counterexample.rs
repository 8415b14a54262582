use std::str::FromStr;

use rand::Rng;

use super::catalog::event_catalog;
use super::{audit_rationality, audit_richness, check_lemmas, Status, Witness, WitnessBuilder};
use crate::error::{Error, Result};
use crate::hilbert::{StateVector, Subspace, C64, EPS_ORTH};
use crate::preference::{elicit_utility, PreferenceOracle};
use crate::problem::{reward_weights, smallest_event, Event, QuantumDecisionProblem};
use crate::sampling::{random_state_in, stream_rng};

/// Which structural requirement is lifted for a counterexample search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relaxation {
    OrthMacr,
    Irrev,
    None,
}

impl Relaxation {
    /// The statement whose proof the lifted requirement protects.
    pub fn default_target(self) -> Option<CounterexampleTarget> {
        match self {
            Relaxation::OrthMacr => Some(CounterexampleTarget::BranchUniqueness),
            Relaxation::Irrev => Some(CounterexampleTarget::IrrevEquivalenceStep),
            Relaxation::None => None,
        }
    }
}

impl FromStr for Relaxation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "orthmacr" => Ok(Relaxation::OrthMacr),
            "irrev" => Ok(Relaxation::Irrev),
            "none" => Ok(Relaxation::None),
            other => Err(Error::InvalidArgument(format!("unknown relaxation `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CounterexampleTarget {
    /// Two partitions of one event into macrostates giving different
    /// branch norms for the same state.
    BranchUniqueness,
    /// Reward weights of a branched state failing to add up over its
    /// branches after an act whose restrictions recohere.
    IrrevEquivalenceStep,
    /// Any audited axiom or lemma, by name.
    Axiom(String),
}

const RICHNESS: [&str; 9] = [
    "Indol", "Restr", "Compos", "Irrev", "PrCont", "ReAv", "BrAv", "Eras", "Compat",
];
const RATIONALITY: [&str; 10] = [
    "Ord", "ActNDeg", "BrIndif", "ErIndif", "ReSup", "StaSup", "MacIndif", "DiacCons", "BrCons", "SolCont",
];
const LEMMAS: [&str; 7] = [
    "Equivalence",
    "RewardNonDeg",
    "Nullity",
    "Dominance",
    "Utility",
    "StandardAct",
    "BornTheorem",
];

/// Names accepted by [`CounterexampleTarget::Axiom`].
pub fn audited_names() -> impl Iterator<Item = &'static str> {
    RICHNESS.into_iter().chain(RATIONALITY).chain(LEMMAS)
}

/// Random search for a witness against `target`; `None` when the budget
/// runs out without one.
pub fn find_counterexample(
    p: &QuantumDecisionProblem,
    oracle: &dyn PreferenceOracle,
    target: &CounterexampleTarget,
    budget: usize,
    seed: u64,
) -> Result<Option<Witness>> {
    match target {
        CounterexampleTarget::BranchUniqueness => Ok(branch_uniqueness(p, budget, seed)),
        CounterexampleTarget::IrrevEquivalenceStep => Ok(irrev_step(p, budget, seed)),
        CounterexampleTarget::Axiom(name) => axiom(p, oracle, name, budget, seed),
    }
}

fn axiom(
    p: &QuantumDecisionProblem,
    oracle: &dyn PreferenceOracle,
    name: &str,
    budget: usize,
    seed: u64,
) -> Result<Option<Witness>> {
    let report = if RICHNESS.contains(&name) {
        audit_richness(p, budget, seed)
    } else if RATIONALITY.contains(&name) {
        audit_rationality(p, oracle, budget, seed)
    } else if LEMMAS.contains(&name) {
        let u = match elicit_utility(p, oracle, super::lemmas::ELICIT_TOL) {
            Ok(u) => u,
            Err(e) => {
                return Ok(Some(
                    WitnessBuilder::new(p, format!("no utility can be elicited: {e}")).build(),
                ));
            }
        };
        check_lemmas(p, oracle, &u, budget, seed)
    } else {
        return Err(Error::UnknownId(format!(
            "no audited axiom or lemma is called `{name}`"
        )));
    };
    Ok(report
        .result(name)
        .filter(|r| r.status == Status::Fail)
        .and_then(|r| r.witness.clone()))
}

/// Sets of mutually orthogonal macrostates, grouped by the subspace they span.
fn partitions(p: &QuantumDecisionProblem) -> Vec<(Subspace, Vec<Event>)> {
    let n = p.macrostates.len().min(12);
    let mut groups: Vec<(Subspace, Vec<Event>)> = Vec::new();
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = Event(mask).members().collect();
        let orthogonal = members.iter().enumerate().all(|(i, &a)| {
            members[i + 1..]
                .iter()
                .all(|&b| p.macrostates[a].subspace.is_orthogonal_to(&p.macrostates[b].subspace))
        });
        if !orthogonal {
            continue;
        }
        let span = members.iter().fold(Subspace::zero(p.dim), |acc, &m| {
            acc.join(&p.macrostates[m].subspace).expect("same ambient space")
        });
        match groups.iter_mut().find(|(s, _)| s.approx_eq(&span)) {
            Some((_, parts)) => parts.push(Event(mask)),
            None => groups.push((span, vec![Event(mask)])),
        }
    }
    groups.retain(|(_, parts)| parts.len() > 1);
    groups
}

fn sorted_norms(p: &QuantumDecisionProblem, psi: &StateVector, part: Event) -> Vec<f64> {
    let mut norms: Vec<f64> = part
        .members()
        .map(|m| p.macrostates[m].subspace.project(psi).expect("dimensions agree").norm())
        .collect();
    norms.sort_by(|a, b| b.total_cmp(a));
    norms
}

fn names(p: &QuantumDecisionProblem, e: Event) -> String {
    e.members()
        .map(|m| p.macrostates[m].id.as_str())
        .collect::<Vec<_>>()
        .join("+")
}

fn branch_uniqueness(p: &QuantumDecisionProblem, budget: usize, seed: u64) -> Option<Witness> {
    let groups = partitions(p);
    if groups.is_empty() {
        return None;
    }
    let mut rng = stream_rng(seed, 31);
    for _ in 0..budget.max(1) {
        let (span, parts) = &groups[rng.random_range(0..groups.len())];
        let a = parts[rng.random_range(0..parts.len())];
        let b = parts[rng.random_range(0..parts.len())];
        if a == b {
            continue;
        }
        let psi = random_state_in(&mut rng, span).expect("partitions are nonzero");
        let (na, nb) = (sorted_norms(p, &psi, a), sorted_norms(p, &psi, b));
        let gap = if na.len() != nb.len() {
            1.0
        } else {
            na.iter().zip(&nb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        if gap > 1e-6 {
            let mut w = WitnessBuilder::new(
                p,
                format!(
                    "the same state decomposes over {} and over {} with different branch norms",
                    names(p, a),
                    names(p, b)
                ),
            )
            .state("psi", &psi)
            .margin("norm_gap", gap);
            for m in a.members().chain(b.members()) {
                let norm = p.macrostates[m]
                    .subspace
                    .project(&psi)
                    .expect("dimensions agree")
                    .norm();
                w = w.margin(&format!("norm_{}", p.macrostates[m].id), norm);
            }
            return Some(w.build());
        }
    }
    None
}

fn irrev_step(p: &QuantumDecisionProblem, budget: usize, seed: u64) -> Option<Witness> {
    let mut rng = stream_rng(seed, 32);
    // Candidate acts and macrostate pairs whose restrictions reach
    // overlapping events.
    let mut candidates = Vec::new();
    for entry in event_catalog(p) {
        let members: Vec<usize> = entry.domain.members().collect();
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                let ra = entry.act.restrict(&p.macrostates[a].subspace).expect("subevent");
                let rb = entry.act.restrict(&p.macrostates[b].subspace).expect("subevent");
                let (ea, eb) = (smallest_event(p, &ra), smallest_event(p, &rb));
                if p.event_subspace(ea).overlap(&p.event_subspace(eb)) > EPS_ORTH {
                    candidates.push((entry.clone(), a, b));
                }
            }
        }
    }
    if candidates.is_empty() {
        return None;
    }
    for _ in 0..budget.max(1) {
        let (entry, a, b) = &candidates[rng.random_range(0..candidates.len())];
        let x = random_state_in(&mut rng, &p.macrostates[*a].subspace).expect("nonzero");
        let y = random_state_in(&mut rng, &p.macrostates[*b].subspace).expect("nonzero");
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let c: f64 = rng.random_range(0.2..0.8);
        let xa = x.scaled(C64::new(c.sqrt(), 0.0));
        let yb = y.scaled(C64::from_polar((1.0 - c).sqrt(), theta));
        let phi = &xa + &yb;
        let whole = entry.act.apply(&phi).ok()?;
        let parts = (entry.act.apply(&xa).ok()?, entry.act.apply(&yb).ok()?);
        let ww = reward_weights(p, &whole).ok()?;
        let w1 = reward_weights(p, &parts.0).ok()?;
        let w2 = reward_weights(p, &parts.1).ok()?;
        let (n1, n2) = (parts.0.norm_sqr(), parts.1.norm_sqr());
        let defect = ww
            .iter()
            .zip(w1.iter().zip(&w2))
            .map(|(w, (u, v))| (w - (u * n1 + v * n2)).abs())
            .fold(0.0, f64::max);
        if defect > 1e-6 {
            return Some(
                WitnessBuilder::new(
                    p,
                    format!(
                        "{} recoheres branches in {} and {}: reward weights of the branched state are not the sum over its branches",
                        entry.label, p.macrostates[*a].id, p.macrostates[*b].id
                    ),
                )
                .state("phi", &phi)
                .state("branch_a", &xa)
                .state("branch_b", &yb)
                .act(&entry.label, &entry.act)
                .margin("additivity_defect", defect)
                .build(),
            );
        }
    }
    None
}
