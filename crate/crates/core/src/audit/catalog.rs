//! Finite act catalogs standing in for the sets of available acts.

use crate::forge::{compat_combine, ActForge, CompatMode};
use crate::hilbert::{PartialIsometryAct, StateVector};
use crate::problem::{Event, QuantumDecisionProblem};

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub label: String,
    pub act: PartialIsometryAct,
    pub domain: Event,
}

/// The lattice event equal to the act's domain, if there is one.
pub fn domain_event(p: &QuantumDecisionProblem, u: &PartialIsometryAct) -> Option<Event> {
    let dom = u.domain();
    let event =
        Event::from_members((0..p.macrostates.len()).filter(|&m| p.macrostates[m].subspace.is_subspace_of(dom)));
    p.event_subspace(event).approx_eq(dom).then_some(event)
}

fn entry(p: &QuantumDecisionProblem, label: String, act: PartialIsometryAct) -> Option<CatalogEntry> {
    let domain = domain_event(p, &act)?;
    Some(CatalogEntry { label, act, domain })
}

/// Acts available at macrostate `m`: the identity, reward acts, branching
/// acts and standard acts at `psi`, and the declared acts restricted to `m`.
/// Constructions the instance has no room for are left out.
pub fn macrostate_catalog(p: &QuantumDecisionProblem, m: usize, psi: &StateVector) -> Vec<CatalogEntry> {
    let id = &p.macrostates[m].id;
    let sub = &p.macrostates[m].subspace;
    let mut out = Vec::new();
    out.extend(entry(p, format!("id[{id}]"), PartialIsometryAct::identity(sub.clone())));
    for (r, reward) in p.rewards.iter().enumerate() {
        if let Ok(u) = ActForge::new(p).reward_act(m, r) {
            out.extend(entry(p, format!("reward[{id}->{}]", reward.id), u));
        }
    }
    let members = p.rewards[p.reward_of(m)].members.len();
    for k in 2..=members.min(3) {
        let weights: Vec<f64> = (1..=k).map(|i| i as f64).collect();
        let total: f64 = weights.iter().sum();
        let mut weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let head: f64 = weights[..k - 1].iter().sum();
        weights[k - 1] = 1.0 - head;
        if let Ok(u) = ActForge::new(p).branching_act(psi, &weights, None) {
            out.extend(entry(p, format!("branch[{id};{k}]"), u));
        }
    }
    for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
        if let Ok(u) = ActForge::new(p).standard_act(psi, alpha) {
            out.extend(entry(p, format!("standard[{id};{alpha}]"), u));
        }
    }
    for g in &p.act_generators {
        if sub.is_subspace_of(g.act.domain()) {
            if let Ok(u) = g.act.restrict(sub) {
                out.extend(entry(p, format!("{}|{id}", g.id), u));
            }
        }
    }
    out
}

/// Acts on joins of several macrostates: the declared acts, and compatible
/// combinations of identity and reward acts on each pair of macrostates.
pub fn event_catalog(p: &QuantumDecisionProblem) -> Vec<CatalogEntry> {
    let mut out = Vec::new();
    for g in &p.act_generators {
        out.extend(entry(p, g.id.clone(), g.act.clone()));
    }
    let n = p.macrostates.len();
    for a in 0..n {
        for b in a + 1..n {
            let ida = PartialIsometryAct::identity(p.macrostates[a].subspace.clone());
            let idb = PartialIsometryAct::identity(p.macrostates[b].subspace.clone());
            if let Ok(c) = compat_combine(p, &[ida.clone(), idb], CompatMode::Macrostate) {
                out.extend(entry(
                    p,
                    format!("id[{}+{}]", p.macrostates[a].id, p.macrostates[b].id),
                    c.act,
                ));
            }
            for (r, reward) in p.rewards.iter().enumerate() {
                let Ok(ua) = ActForge::new(p).reward_act(b, r) else {
                    continue;
                };
                if let Ok(c) = compat_combine(p, &[ida.clone(), ua], CompatMode::Macrostate) {
                    out.extend(entry(
                        p,
                        format!(
                            "id[{}]+reward[{}->{}]",
                            p.macrostates[a].id, p.macrostates[b].id, reward.id
                        ),
                        c.act,
                    ));
                }
            }
        }
    }
    out
}
