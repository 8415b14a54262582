use rand::seq::IndexedRandom;
use rand::Rng;

use super::catalog::{event_catalog, macrostate_catalog, CatalogEntry};
use super::{isometric, max_entry, skippable, AuditReport, Tally, WitnessBuilder, RADII};
use crate::error::Error;
use crate::forge::{compat_combine, compose_acts, identity_act, validate_weights, ActForge, CompatMode};
use crate::hilbert::{PartialIsometryAct, StateVector, C64, EPS_NORM, EPS_ORTH};
use crate::problem::{reward_weights, smallest_event, Event, QuantumDecisionProblem};
use crate::sampling::{perturb, random_state_in, stream_rng};

/// Every act the richness audits quantify over, with the state each
/// macrostate catalog was built at.
pub(crate) fn full_catalog<R: Rng + ?Sized>(p: &QuantumDecisionProblem, rng: &mut R) -> Vec<CatalogEntry> {
    let mut out = Vec::new();
    for m in 0..p.macrostates.len() {
        let psi = random_state_in(rng, &p.macrostates[m].subspace).expect("macrostates are nonzero");
        out.extend(macrostate_catalog(p, m, &psi));
    }
    out.extend(event_catalog(p));
    out
}

fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    let mut sub = mask;
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let current = sub;
        if sub == 0 {
            done = true;
        } else {
            sub = (sub - 1) & mask;
        }
        Some(current)
    })
}

fn scaled<R: Rng + ?Sized>(rng: &mut R, v: StateVector) -> StateVector {
    let s: f64 = rng.random_range(0.5..2.0);
    v.scaled(C64::new(s, 0.0))
}

pub fn audit_richness(p: &QuantumDecisionProblem, samples: usize, seed: u64) -> AuditReport {
    let catalog = full_catalog(p, &mut stream_rng(seed, 100));
    let results = vec![
        indol(p, samples, seed),
        restr(p, &catalog, seed),
        compos(p, &catalog, samples, seed),
        irrev(p, &catalog),
        prcont(p, &catalog, samples, seed),
        reav(p),
        brav(p, samples, seed),
        eras(p, samples, seed),
        compat(p, samples, seed),
    ];
    AuditReport {
        suite: "richness".into(),
        oracle: None,
        seed,
        samples,
        radii: RADII.to_vec(),
        results,
    }
}

fn events(p: &QuantumDecisionProblem, samples: usize, rng: &mut impl Rng) -> Vec<Event> {
    let n = p.macrostates.len();
    if n <= 10 {
        (1..1u32 << n).map(Event).collect()
    } else {
        (0..samples)
            .map(|_| Event(rng.random_range(1..=p.full_event().0)))
            .collect()
    }
}

fn indol(p: &QuantumDecisionProblem, samples: usize, seed: u64) -> super::AxiomResult {
    let mut t = Tally::new("Indol");
    let mut rng = stream_rng(seed, 1);
    for e in events(p, samples, &mut rng) {
        let sub = p.event_subspace(e);
        let u = match identity_act(&sub) {
            Ok(u) => u,
            Err(err) => {
                t.fail(WitnessBuilder::new(p, format!("no identity act: {err}")).build());
                continue;
            }
        };
        let base = random_state_in(&mut rng, &sub).expect("nonzero event");
        let psi = scaled(&mut rng, base);
        let out = u.apply(&psi).expect("state drawn from the domain");
        let gap = out.distance(&psi);
        t.expect(gap <= EPS_NORM && isometric(&u), || {
            WitnessBuilder::new(p, "identity act moves a state of its own event")
                .state("psi", &psi)
                .act("identity", &u)
                .margin("displacement", gap)
                .build()
        });
    }
    t.finish()
}

fn restr(p: &QuantumDecisionProblem, catalog: &[CatalogEntry], seed: u64) -> super::AxiomResult {
    let mut t = Tally::new("Restr");
    let mut rng = stream_rng(seed, 2);
    for entry in catalog {
        for sub in submasks(entry.domain.0).filter(|&s| s != 0) {
            let f = p.event_subspace(Event(sub));
            let r = match entry.act.restrict(&f) {
                Ok(r) => r,
                Err(err) => {
                    t.fail(
                        WitnessBuilder::new(p, format!("{} cannot be restricted: {err}", entry.label))
                            .act(&entry.label, &entry.act)
                            .build(),
                    );
                    continue;
                }
            };
            let psi = random_state_in(&mut rng, &f).expect("nonzero event");
            let gap = r
                .apply(&psi)
                .and_then(|a| entry.act.apply(&psi).map(|b| a.distance(&b)))
                .unwrap_or(f64::INFINITY);
            t.expect(gap <= EPS_NORM && isometric(&r) && r.domain().approx_eq(&f), || {
                WitnessBuilder::new(p, format!("restriction of {} disagrees with it", entry.label))
                    .state("psi", &psi)
                    .act(&entry.label, &entry.act)
                    .act("restriction", &r)
                    .margin("disagreement", gap)
                    .build()
            });
        }
    }
    t.finish()
}

fn compos(p: &QuantumDecisionProblem, catalog: &[CatalogEntry], samples: usize, seed: u64) -> super::AxiomResult {
    let mut t = Tally::new("Compos");
    let mut rng = stream_rng(seed, 3);
    let budget = samples.max(1) * 4;
    let mut pairs = Vec::new();
    for (i, u) in catalog.iter().enumerate() {
        let needed = smallest_event(p, &u.act);
        pairs.push((i, None));
        for (j, v) in catalog.iter().enumerate() {
            if needed.is_subevent_of(v.domain) {
                pairs.push((i, Some(j)));
            }
        }
    }
    if pairs.len() > budget {
        pairs = pairs.choose_multiple(&mut rng, budget).copied().collect();
        pairs.sort_unstable();
    }
    for (i, j) in pairs {
        let u = &catalog[i];
        let (label, v) = match j {
            Some(j) => (catalog[j].label.clone(), catalog[j].act.clone()),
            None => (
                "id[O_U]".to_string(),
                PartialIsometryAct::identity(p.event_subspace(smallest_event(p, &u.act))),
            ),
        };
        let vu = match compose_acts(p, &v, &u.act) {
            Ok(x) => x,
            Err(err) => {
                t.fail(
                    WitnessBuilder::new(p, format!("{label} after {} is unavailable: {err}", u.label))
                        .act(&u.label, &u.act)
                        .act(&label, &v)
                        .build(),
                );
                continue;
            }
        };
        let psi = random_state_in(&mut rng, u.act.domain()).expect("nonzero domain");
        let direct = u.act.apply(&psi).and_then(|x| v.apply(&x));
        let gap = match (vu.apply(&psi), direct) {
            (Ok(a), Ok(b)) => a.distance(&b),
            _ => f64::INFINITY,
        };
        t.expect(
            gap <= EPS_NORM && isometric(&vu) && vu.domain().approx_eq(u.act.domain()),
            || {
                WitnessBuilder::new(p, format!("composition {label} after {} misbehaves", u.label))
                    .state("psi", &psi)
                    .act(&u.label, &u.act)
                    .act(&label, &v)
                    .margin("disagreement", gap)
                    .build()
            },
        );
    }
    t.finish()
}

fn irrev(p: &QuantumDecisionProblem, catalog: &[CatalogEntry]) -> super::AxiomResult {
    let mut t = Tally::new("Irrev");
    for entry in catalog.iter().filter(|e| e.domain.count() >= 2) {
        let singles = entry.domain.count() > 8;
        let subs: Vec<u32> = if singles {
            entry.domain.members().map(|m| 1 << m).collect()
        } else {
            submasks(entry.domain.0).filter(|&s| s != 0).collect()
        };
        let mut smallest = Vec::with_capacity(subs.len());
        for &s in &subs {
            let r = entry
                .act
                .restrict(&p.event_subspace(Event(s)))
                .expect("subevent of the domain");
            smallest.push((s, smallest_event(p, &r), r));
        }
        for a in 0..smallest.len() {
            for b in a + 1..smallest.len() {
                let (fa, oa, ra) = &smallest[a];
                let (fb, ob, rb) = &smallest[b];
                if fa & fb != 0 {
                    continue;
                }
                let overlap = p.event_subspace(*oa).overlap(&p.event_subspace(*ob));
                t.expect(overlap <= EPS_ORTH, || {
                    let name = |e: Event| {
                        e.members()
                            .map(|m| p.macrostates[m].id.as_str())
                            .collect::<Vec<_>>()
                            .join("+")
                    };
                    WitnessBuilder::new(
                        p,
                        format!(
                            "{}: restrictions to {} and {} reach overlapping events {} and {}",
                            entry.label,
                            name(Event(*fa)),
                            name(Event(*fb)),
                            name(*oa),
                            name(*ob)
                        ),
                    )
                    .act(&entry.label, &entry.act)
                    .act("restriction_E", ra)
                    .act("restriction_F", rb)
                    .margin("overlap", overlap)
                    .build()
                });
            }
        }
    }
    t.finish()
}

fn prcont(p: &QuantumDecisionProblem, catalog: &[CatalogEntry], samples: usize, seed: u64) -> super::AxiomResult {
    let mut t = Tally::new("PrCont");
    let mut rng = stream_rng(seed, 5);
    if catalog.is_empty() {
        return t.finish();
    }
    for _ in 0..samples.max(1) {
        let entry = catalog.choose(&mut rng).expect("catalog is nonempty");
        for radius in RADII {
            let moved = match perturb(&mut rng, &entry.act, radius) {
                Ok(m) => m,
                Err(err) => {
                    t.fail(WitnessBuilder::new(p, format!("perturbation of {} failed: {err}", entry.label)).build());
                    continue;
                }
            };
            let distance = (moved.operator() - entry.act.operator()).norm();
            t.expect(isometric(&moved) && distance <= 3.0 * radius, || {
                WitnessBuilder::new(p, format!("perturbation of {} left the act set", entry.label))
                    .act(&entry.label, &entry.act)
                    .act("perturbed", &moved)
                    .margin("radius", radius)
                    .margin("distance", distance)
                    .build()
            });
        }
    }
    t.finish()
}

fn reav(p: &QuantumDecisionProblem) -> super::AxiomResult {
    let mut t = Tally::existence("ReAv");
    for m in 0..p.macrostates.len() {
        for r in 0..p.rewards.len() {
            match ActForge::new(p).reward_act(m, r) {
                Ok(u) => {
                    let reach = smallest_event(p, &u);
                    t.expect(reach.is_subevent_of(p.reward_event(r)) && isometric(&u), || {
                        WitnessBuilder::new(
                            p,
                            format!(
                                "reward act {} -> {} leaves the reward",
                                p.macrostates[m].id, p.rewards[r].id
                            ),
                        )
                        .act("reward_act", &u)
                        .build()
                    });
                }
                Err(e) if skippable(&e) => t.skip(e.to_string()),
                Err(e) => t.fail(WitnessBuilder::new(p, e.to_string()).build()),
            }
        }
    }
    t.finish()
}

fn random_weights<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = w[..k - 1].iter().sum();
    w[k - 1] = 1.0 - head;
    w
}

fn brav(p: &QuantumDecisionProblem, samples: usize, seed: u64) -> super::AxiomResult {
    let mut t = Tally::existence("BrAv");
    let mut rng = stream_rng(seed, 7);
    let per = (samples / p.macrostates.len().max(1)).max(1);
    for m in 0..p.macrostates.len() {
        let r = p.reward_of(m);
        let members = Event::from_members(p.rewards[r].members.iter().copied());
        let dim = p.macrostates[m].subspace.dim();
        let configs: Vec<Vec<usize>> = submasks(members.0)
            .filter(|&s| s != 0 && s.count_ones() <= 5)
            .map(|s| Event(s).members().collect::<Vec<_>>())
            .filter(|ts| ts.iter().map(|&n| p.macrostates[n].subspace.dim()).sum::<usize>() >= dim)
            .collect();
        if configs.is_empty() {
            t.skip(format!(
                "reward `{}` cannot host a branching of macrostate `{}`",
                p.rewards[r].id, p.macrostates[m].id
            ));
            continue;
        }
        for _ in 0..per {
            let targets = configs.choose(&mut rng).expect("nonempty").clone();
            let weights = random_weights(&mut rng, targets.len());
            debug_assert!(validate_weights(&weights).is_ok());
            let base = random_state_in(&mut rng, &p.macrostates[m].subspace).expect("nonzero");
            let psi = scaled(&mut rng, base);
            match ActForge::new(p).branching_act(&psi, &weights, Some(&targets)) {
                Ok(u) => {
                    let out = u.apply(&psi).expect("state in the domain");
                    let norm2 = psi.norm_sqr();
                    let worst = targets
                        .iter()
                        .zip(&weights)
                        .map(|(&n, w)| {
                            let got = p.macrostates[n].subspace.project(&out).expect("dims").norm_sqr();
                            (got - w * norm2).abs() / norm2
                        })
                        .fold(0.0, f64::max);
                    let reach = smallest_event(p, &u);
                    let ok = worst <= 1e-9
                        && reach == Event::from_members(targets.iter().copied())
                        && reach.is_subevent_of(members)
                        && isometric(&u);
                    t.expect(ok, || {
                        WitnessBuilder::new(
                            p,
                            format!("branching act at `{}` misses its weights", p.macrostates[m].id),
                        )
                        .state("psi", &psi)
                        .act("branching", &u)
                        .margin("weight_error", worst)
                        .build()
                    });
                }
                Err(e) if skippable(&e) => t.skip(e.to_string()),
                Err(e) => t.fail(WitnessBuilder::new(p, e.to_string()).state("psi", &psi).build()),
            }
        }
    }
    t.finish()
}

fn eras(p: &QuantumDecisionProblem, samples: usize, seed: u64) -> super::AxiomResult {
    let mut t = Tally::existence("Eras");
    let mut rng = stream_rng(seed, 8);
    let mut pairs = Vec::new();
    for r in 0..p.rewards.len() {
        for &a in &p.rewards[r].members {
            for &b in &p.rewards[r].members {
                pairs.push((r, a, b));
            }
        }
    }
    let per = (samples / pairs.len().max(1)).max(1);
    for (r, a, b) in pairs {
        let e = p.rewards[r].erasure;
        let need = p.macrostates[a].subspace.dim().max(p.macrostates[b].subspace.dim());
        if p.macrostates[e].subspace.dim() < need {
            t.skip(format!(
                "erasure macrostate `{}` of `{}` is smaller than the erased macrostates",
                p.macrostates[e].id, p.rewards[r].id
            ));
            continue;
        }
        for s in 0..per {
            let norm: f64 = rng.random_range(0.5..2.0);
            let psi1 = random_state_in(&mut rng, &p.macrostates[a].subspace)
                .expect("nonzero")
                .scaled(C64::new(norm, 0.0));
            let psi2 = if a == b && s == 0 {
                psi1.clone()
            } else {
                random_state_in(&mut rng, &p.macrostates[b].subspace)
                    .expect("nonzero")
                    .scaled(C64::new(norm, 0.0))
            };
            match ActForge::new(p).erasure_pair(&psi1, &psi2) {
                Ok((u1, u2)) => {
                    let gap = u1
                        .apply(&psi1)
                        .expect("domain")
                        .distance(&u2.apply(&psi2).expect("domain"));
                    let reward = p.reward_event(r);
                    let ok = gap <= 1e-9
                        && smallest_event(p, &u1).is_subevent_of(reward)
                        && smallest_event(p, &u2).is_subevent_of(reward)
                        && isometric(&u1)
                        && isometric(&u2);
                    t.expect(ok, || {
                        WitnessBuilder::new(p, format!("erasure pair in `{}` does not meet", p.rewards[r].id))
                            .state("psi1", &psi1)
                            .state("psi2", &psi2)
                            .act("U1", &u1)
                            .act("U2", &u2)
                            .margin("image_gap", gap)
                            .build()
                    });
                }
                Err(e) if skippable(&e) => t.skip(e.to_string()),
                Err(e) => t.fail(WitnessBuilder::new(p, e.to_string()).build()),
            }
            if s == 0 {
                let short = psi2.scaled(C64::new(0.9, 0.0));
                let refused = matches!(
                    ActForge::new(p).erasure_pair(&psi1, &short),
                    Err(Error::NormMismatch { .. })
                );
                t.expect(refused, || {
                    WitnessBuilder::new(p, "erasure accepted states of different norms")
                        .state("psi1", &psi1)
                        .state("psi2", &short)
                        .build()
                });
            }
        }
    }
    t.finish()
}

fn block_act<R: Rng + ?Sized>(
    p: &QuantumDecisionProblem,
    rng: &mut R,
    m: usize,
    psi: &StateVector,
) -> crate::error::Result<(String, PartialIsometryAct)> {
    let mut forge = ActForge::new(p);
    let sub = &p.macrostates[m].subspace;
    match rng.random_range(0..4) {
        0 => Ok(("identity".into(), identity_act(sub)?)),
        1 => {
            let r = rng.random_range(0..p.rewards.len());
            Ok((format!("reward->{}", p.rewards[r].id), forge.reward_act(m, r)?))
        }
        2 => {
            let k = p.rewards[p.reward_of(m)].members.len().min(3);
            let k = rng.random_range(1..=k);
            let weights = random_weights(rng, k);
            Ok(("branching".into(), forge.branching_act(psi, &weights, None)?))
        }
        _ => Ok(("erasure".into(), forge.erasure_pair(psi, psi)?.0)),
    }
}

fn compat(p: &QuantumDecisionProblem, samples: usize, seed: u64) -> super::AxiomResult {
    let mut t = Tally::new("Compat");
    let mut rng = stream_rng(seed, 9);
    let n = p.macrostates.len();
    if n < 2 {
        t.skip("fewer than two macrostates");
        return t.finish();
    }
    for _ in 0..samples.max(1) {
        let mut chosen: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if chosen.len() < 2 {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            chosen = vec![a.min(b), a.max(b)];
        }
        let mut acts = Vec::new();
        let mut states = Vec::new();
        let mut skipped = None;
        for &m in &chosen {
            let psi = random_state_in(&mut rng, &p.macrostates[m].subspace).expect("nonzero");
            match block_act(p, &mut rng, m, &psi) {
                Ok((_, u)) => {
                    acts.push(u);
                    states.push(psi);
                }
                Err(e) => {
                    skipped = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = skipped {
            t.skip(e.to_string());
            continue;
        }
        let combined = match compat_combine(p, &acts, CompatMode::Macrostate) {
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
        let mut worst = 0.0f64;
        let mut weights_gap = 0.0f64;
        let mut reaches = Vec::new();
        for (i, u) in acts.iter().enumerate() {
            let block = combined.act.restrict(u.domain()).expect("block of the combined domain");
            let expected = &combined.retargets[i] * u.operator();
            worst = worst.max(max_entry(&(block.operator() - expected)));
            let before = reward_weights(p, &u.apply(&states[i]).expect("domain")).expect("nonzero");
            let after = reward_weights(p, &block.apply(&states[i]).expect("domain")).expect("nonzero");
            for (x, y) in before.iter().zip(&after) {
                weights_gap = weights_gap.max((x - y).abs());
            }
            reaches.push(smallest_event(p, &block));
        }
        let disjoint = (0..reaches.len()).all(|i| (i + 1..reaches.len()).all(|j| reaches[i].is_disjoint(reaches[j])));
        let ok = worst <= 1e-9 && weights_gap <= 1e-9 && disjoint && isometric(&combined.act);
        t.expect(ok, || {
            let mut w = WitnessBuilder::new(p, "combined act does not restrict to the re-targeted blocks")
                .act("combined", &combined.act);
            for (i, u) in acts.iter().enumerate() {
                w = w.act(&format!("block{i}"), u);
            }
            w.margin("block_error", worst)
                .margin("reward_weight_error", weights_gap)
                .build()
        });
    }
    t.finish()
}
