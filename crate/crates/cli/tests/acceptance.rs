//! Acceptance suite: one PASS/FAIL line per criterion. Reference values
//! are computed here from first principles, not through the library's own
//! helpers, wherever the library is the thing being checked.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::error::Error as StdError;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use qdt_core::audit::{audit_rationality, replay, Status, Witness};
use qdt_core::branching::{born_deviation_norm, counting_frequencies, modal_counts, BranchTree};
use qdt_core::classical::{
    check_vnm_axioms, mix, random_lotteries, savage_probability, vnm_elicit, LexicographicOracle, LotteryOracle,
    PlantedMeasureOracle, PmeuOracle,
};
use qdt_core::forge::{ActForge, CompatMode};
use qdt_core::hilbert::{orthonormalize, PartialIsometryAct, StateVector, Subspace, C64};
use qdt_core::instance::{load, OracleKind};
use qdt_core::preference::{
    born_compare, elicit_utility_at, is_null_pair, make_standard_act, nullity_catalog, probe, reduce_to_standard,
    BornOracle, NullMethod, PreferenceOracle, UtilityTable, DEFAULT_MAX_NULL_PAIRS,
};
use qdt_core::problem::{AccessibleState, Event, QuantumDecisionProblem};
use qdt_core::sampling::{
    random_isometry, random_problem, random_state, random_state_in, random_subspace, steer, stream_rng, Layout,
};
use qdt_core::Error;

type Outcome = Result<String, Box<dyn StdError>>;

const SEED: u64 = 20_240_611;
const TIE: f64 = 1e-9;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), Box<dyn StdError>> {
    if ok {
        Ok(())
    } else {
        Err(msg().into())
    }
}

// ---- independent references -------------------------------------------

fn projector(basis: &DMatrix<C64>) -> DMatrix<C64> {
    basis * basis.adjoint()
}

fn reward_projector(p: &QuantumDecisionProblem, r: usize) -> DMatrix<C64> {
    let mut sum = DMatrix::zeros(p.dim, p.dim);
    for &m in &p.rewards[r].members {
        sum += projector(p.macrostates[m].subspace.basis());
    }
    sum
}

/// `U ψ̂` from the act's domain basis and column matrix.
fn image(u: &PartialIsometryAct, psi: &StateVector) -> DVector<C64> {
    let v = psi.as_vector() / C64::new(psi.as_vector().norm(), 0.0);
    u.matrix() * (u.domain().basis().adjoint() * v)
}

fn weights_of(p: &QuantumDecisionProblem, v: &DVector<C64>) -> Vec<f64> {
    (0..p.rewards.len())
        .map(|r| (reward_projector(p, r) * v).norm_squared())
        .collect()
}

fn eu(p: &QuantumDecisionProblem, psi: &StateVector, u: &PartialIsometryAct, util: &UtilityTable) -> f64 {
    weights_of(p, &image(u, psi))
        .iter()
        .zip(&p.rewards)
        .map(|(w, r)| w * util.get(&r.id).unwrap())
        .sum()
}

fn sign(d: f64) -> Ordering {
    if d > TIE {
        Ordering::Greater
    } else if d < -TIE {
        Ordering::Less
    } else {
        Ordering::Equal
    }
}

fn max_entry(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

// ---- random instances -------------------------------------------------

/// At most 8 dimensions, 6 macrostates and 4 rewards.
fn random_layout<R: Rng>(rng: &mut R) -> Layout {
    let n = rng.random_range(2..=6);
    let mut dims = vec![1; n];
    let mut total = n;
    for d in &mut dims {
        if total < 8 && rng.random_bool(0.4) {
            *d = 2;
            total += 1;
        }
    }
    let k = rng.random_range(2..=n.min(4));
    // Cut points split 0..n into k nonempty runs.
    let mut cuts: Vec<usize> = (1..n).collect();
    while cuts.len() > k - 1 {
        cuts.remove(rng.random_range(0..cuts.len()));
    }
    cuts.push(n);
    let mut rewards = Vec::new();
    let mut start = 0;
    for c in cuts {
        rewards.push((start..c).collect());
        start = c;
    }
    Layout {
        macrostate_dims: dims,
        rewards,
    }
}

/// `u(r0) = 0`, `u(r1) = 1`, the rest uniform in between.
fn planted<R: Rng>(rng: &mut R, p: &QuantumDecisionProblem) -> UtilityTable {
    UtilityTable::new(
        p.rewards
            .iter()
            .map(|r| {
                let v = if r.is_r0 {
                    0.0
                } else if r.is_r1 {
                    1.0
                } else {
                    rng.random_range(0.01..0.99)
                };
                (r.id.clone(), v)
            })
            .collect(),
    )
}

fn random_event_with<R: Rng>(rng: &mut R, p: &QuantumDecisionProblem, m: usize) -> Event {
    Event(rng.random_range(0..=p.full_event().0) | Event::single(m).0)
}

fn scale<R: Rng>(rng: &mut R) -> C64 {
    C64::from_polar(rng.random_range(0.2..3.0), rng.random_range(0.0..std::f64::consts::TAU))
}

// ---- criteria ----------------------------------------------------------

fn born_identity() -> Outcome {
    let mut rng = stream_rng(SEED, 1);
    let mut ties = 0;
    for i in 0..200 {
        let layout = random_layout(&mut rng);
        let p = random_problem(&mut rng, &layout);
        let util = planted(&mut rng, &p);
        let m = rng.random_range(0..p.macrostates.len());
        let psi = random_state_in(&mut rng, &p.macrostates[m].subspace)?.scaled(scale(&mut rng));
        let full = Subspace::full(p.dim);
        let e = random_event_with(&mut rng, &p, m);
        let left = random_isometry(&mut rng, &p.event_subspace(e), &full)?;
        // Every tenth pair compares an act with itself to exercise the tie.
        let right = if i % 10 == 0 {
            left.clone()
        } else {
            let e = random_event_with(&mut rng, &p, m);
            random_isometry(&mut rng, &p.event_subspace(e), &full)?
        };
        let want = sign(eu(&p, &psi, &left, &util) - eu(&p, &psi, &right, &util));
        let got = born_compare(&p, &psi, &left, &right, &util)?;
        ensure(got == want, || {
            format!("triple {i}: born_compare {got:?}, expected-utility sign {want:?}")
        })?;
        ties += (want == Ordering::Equal) as usize;
    }
    Ok(format!("200/200 agree ({ties} ties)"))
}

fn equivalence() -> Outcome {
    let mut rng = stream_rng(SEED, 2);
    let mut comparisons = 0;
    for i in 0..100 {
        let layout = random_layout(&mut rng);
        let p = random_problem(&mut rng, &layout);
        let oracle = BornOracle::new(planted(&mut rng, &p));
        let m = rng.random_range(0..p.macrostates.len());
        let dom = p.macrostates[m].subspace.clone();
        let full = Subspace::full(p.dim);
        let psi = random_state_in(&mut rng, &dom)?;
        let phi = random_state(&mut rng, p.dim);
        // Same norm in every reward, different direction inside each.
        let mut twin = DVector::<C64>::zeros(p.dim);
        for r in 0..p.rewards.len() {
            let norm = (reward_projector(&p, r) * phi.as_vector()).norm();
            let dir = random_state_in(&mut rng, &p.reward_subspace(r))?;
            twin += dir.as_vector() * C64::new(norm, 0.0);
        }
        let twin = StateVector::from_vector(twin);
        let u = steer(&mut rng, &dom, &psi, &phi, &full)?;
        let v = steer(&mut rng, &dom, &psi, &twin, &full)?;
        let (wu, wv) = (weights_of(&p, &image(&u, &psi)), weights_of(&p, &image(&v, &psi)));
        let gap = wu
            .iter()
            .zip(&wv)
            .map(|(a, b)| (a.sqrt() - b.sqrt()).abs())
            .fold(0.0, f64::max);
        ensure(gap <= 1e-9, || format!("pair {i}: reward norms differ by {gap:e}"))?;
        ensure(oracle.compare(&p, &psi, &u, &v)? == Ordering::Equal, || {
            format!("pair {i}: matched acts not indifferent")
        })?;
        for _ in 0..3 {
            let x = random_isometry(&mut rng, &dom, &full)?;
            let a = (oracle.compare(&p, &psi, &u, &x)?, oracle.compare(&p, &psi, &x, &u)?);
            let b = (oracle.compare(&p, &psi, &v, &x)?, oracle.compare(&p, &psi, &x, &v)?);
            ensure(a == b, || {
                format!("pair {i}: verdicts against a third act differ, {a:?} vs {b:?}")
            })?;
            comparisons += 4;
        }
    }
    Ok(format!("100 pairs, {comparisons} comparisons identical"))
}

fn roomy_layouts() -> [Layout; 2] {
    [
        Layout {
            macrostate_dims: vec![2, 1, 1, 2],
            rewards: vec![vec![0], vec![1, 2], vec![3]],
        },
        Layout {
            macrostate_dims: vec![1, 1, 1, 1, 1, 1],
            rewards: vec![vec![0, 1], vec![2, 3], vec![4, 5]],
        },
    ]
}

fn dominance() -> Outcome {
    let mut rng = stream_rng(SEED, 3);
    let layouts = roomy_layouts();
    for i in 0..100 {
        let p = random_problem(&mut rng, &layouts[i % 2]);
        let oracle = BornOracle::new(planted(&mut rng, &p));
        let m = rng.random_range(0..p.macrostates.len());
        let psi = random_state_in(&mut rng, &p.macrostates[m].subspace)?;
        let alpha: f64 = rng.random_range(1e-6..=1.0);
        let beta = alpha - rng.random_range(1e-6..=alpha);
        let beta = beta.max(0.0);
        let (va, vb) = (make_standard_act(&p, &psi, alpha)?, make_standard_act(&p, &psi, beta)?);
        for (v, w) in [(&va, alpha), (&vb, beta)] {
            let got = weights_of(&p, &image(v, &psi))[p.r1()];
            ensure((got - w).abs() <= 1e-9, || {
                format!("pair {i}: standard act of weight {w} has r1 weight {got}")
            })?;
        }
        let strict = oracle.compare(&p, &psi, &va, &vb)?;
        ensure(strict == Ordering::Greater, || {
            format!("pair {i}: V_{alpha} vs V_{beta} gave {strict:?}")
        })?;
        let near = (alpha + 1e-13).min(1.0);
        let vn = make_standard_act(&p, &psi, near)?;
        let tie = oracle.compare(&p, &psi, &va, &vn)?;
        ensure(tie == Ordering::Equal, || {
            format!("pair {i}: weights {alpha} and {near} not indifferent")
        })?;
    }
    Ok("100 strict pairs and 100 near-ties".into())
}

fn nullity() -> Outcome {
    let mut rng = stream_rng(SEED, 4);
    let (mut events, mut nulls) = (0usize, 0usize);
    for inst in 0..20 {
        let n = rng.random_range(4..=6);
        let mut dims = vec![1; n];
        dims[0] = 2;
        dims[n - 1] = 2;
        let mid: Vec<usize> = (1..n - 1).collect();
        let split = rng.random_range(1..=mid.len());
        let mut rewards = vec![vec![0], mid[..split].to_vec()];
        if split < mid.len() {
            rewards.push(mid[split..].to_vec());
        }
        rewards.push(vec![n - 1]);
        let p = random_problem(
            &mut rng,
            &Layout {
                macrostate_dims: dims,
                rewards,
            },
        );
        let oracle = BornOracle::new(planted(&mut rng, &p));
        for _ in 0..3 {
            let m = rng.random_range(0..n);
            let k = p.macrostates[m].subspace.dim();
            // A room of at most two macrostates able to host the source.
            let room = loop {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                let e = Event::from_members([a, b]);
                if p.event_subspace(e).dim() >= k {
                    break e;
                }
            };
            let members: Vec<usize> = room.members().collect();
            // Leave a branch of the room empty now and then so both verdicts occur.
            let support = Event::from_members(members.iter().copied().filter(|_| rng.random_bool(0.6)));
            let support = if support.is_empty() {
                Event::single(members[0])
            } else {
                support
            };
            let psi = random_state_in(&mut rng, &p.macrostates[m].subspace)?;
            let target = random_state_in(&mut rng, &p.event_subspace(support))?;
            let w = steer(
                &mut rng,
                &p.macrostates[m].subspace,
                &psi,
                &target,
                &p.event_subspace(room),
            )?;
            let phi = AccessibleState::new(&p, psi, w)?;
            let catalog = nullity_catalog(&p, &phi)?;
            for mask in 0..1u32 << n {
                let e = Event(mask);
                let crit = is_null_pair(
                    &p,
                    e,
                    &phi,
                    NullMethod::Criterion,
                    &oracle,
                    None,
                    DEFAULT_MAX_NULL_PAIRS,
                )?;
                let defn = is_null_pair(
                    &p,
                    e,
                    &phi,
                    NullMethod::Definitional,
                    &oracle,
                    Some(&catalog),
                    DEFAULT_MAX_NULL_PAIRS,
                )?;
                ensure(crit == defn, || {
                    format!("instance {inst}, event {mask:#b}: criterion {crit}, definition {defn}")
                })?;
                // Reference: squared projection of the reached state onto E.
                let mut proj = DMatrix::zeros(p.dim, p.dim);
                for i in e.members() {
                    proj += projector(p.macrostates[i].subspace.basis());
                }
                let weight = (proj * phi.state.as_vector()).norm();
                ensure(crit == (weight <= 1e-9), || {
                    format!("instance {inst}, event {mask:#b}: weight {weight:e}")
                })?;
                events += 1;
                nulls += crit as usize;
            }
        }
    }
    ensure(nulls > 0 && nulls < events, || "only one verdict occurred".into())?;
    Ok(format!("{events} events agree ({nulls} null)"))
}

fn utility_round_trip() -> Outcome {
    let mut rng = stream_rng(SEED, 5);
    let mut worst = 0.0f64;
    let mut most_steps = 0;
    for i in 0..50 {
        let layout = random_layout(&mut rng);
        let p = random_problem(&mut rng, &layout);
        let util = planted(&mut rng, &p);
        let (m, psi) = probe(&p);
        let (got, stats) = elicit_utility_at(&p, &BornOracle::new(util.clone()), 1e-6, m, &psi)?;
        for r in &p.rewards {
            let err = (got.get(&r.id)? - util.get(&r.id)?).abs();
            ensure(err <= 1e-6, || format!("table {i}: `{}` off by {err:e}", r.id))?;
            worst = worst.max(err);
        }
        let steps = stats.steps.values().copied().max().unwrap_or(0);
        ensure(steps <= 40, || format!("table {i}: {steps} bisection steps"))?;
        most_steps = most_steps.max(steps);
    }
    Ok(format!(
        "50 tables, worst error {worst:.1e}, at most {most_steps} steps"
    ))
}

fn standard_act_reduction() -> Outcome {
    let mut rng = stream_rng(SEED, 6);
    let layout = Layout {
        macrostate_dims: vec![3, 1, 1, 3],
        rewards: vec![vec![0], vec![1], vec![2], vec![3]],
    };
    let mut worst = 0.0f64;
    for i in 0..100 {
        let p = random_problem(&mut rng, &layout);
        let util = planted(&mut rng, &p);
        let m = rng.random_range(0..p.macrostates.len());
        let psi = random_state_in(&mut rng, &p.macrostates[m].subspace)?.scaled(scale(&mut rng));
        let u = random_isometry(&mut rng, &p.macrostates[m].subspace, &Subspace::full(p.dim))?;
        let s = reduce_to_standard(&p, &psi, &u, &util)?;
        let w = weights_of(&p, &image(&s, &psi));
        let stray: f64 = (0..p.rewards.len())
            .filter(|&r| r != p.r0() && r != p.r1())
            .map(|r| w[r])
            .sum();
        ensure(stray <= 1e-9, || {
            format!("act {i}: {stray:e} of the reduced image lies outside r0 and r1")
        })?;
        let target = eu(&p, &psi, &u, &util);
        let err = (w[p.r1()] - target).abs();
        ensure(err <= 1e-9, || {
            format!("act {i}: weight {} vs expected utility {target}", w[p.r1()])
        })?;
        let verdict = born_compare(&p, &psi, &s, &u, &util)?;
        ensure(verdict == Ordering::Equal, || {
            format!("act {i}: reduced act compares {verdict:?}")
        })?;
        worst = worst.max(err);
    }
    Ok(format!("100 acts, worst weight error {worst:.1e}"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
}

fn through_json(w: &Witness) -> Result<Witness, Box<dyn StdError>> {
    Ok(serde_json::from_str(&serde_json::to_string(w)?)?)
}

fn fixture_audits() -> Outcome {
    let mut skipped = 0;
    for name in ["min2", "three_reward8", "four_reward8", "cycle3"] {
        let inst = load(&fixture(name))?;
        let born = inst.oracle(Some(OracleKind::Born));
        let report = audit_rationality(&inst.problem, born.as_ref(), 200, SEED);
        ensure(report.passed(), || format!("Born fails on {name}:\n{report}"))?;
        skipped += report.results.iter().filter(|r| r.status == Status::Skipped).count();
    }
    let inst = load(&fixture("three_reward8"))?;
    let counting = inst.oracle(Some(OracleKind::Counting));
    let report = audit_rationality(&inst.problem, counting.as_ref(), 200, SEED);
    let r = report.result("BrIndif").ok_or("no BrIndif result")?;
    ensure(r.status == Status::Fail, || {
        format!("counting oracle passes BrIndif:\n{report}")
    })?;
    let w = through_json(r.witness.as_ref().ok_or("BrIndif failure without witness")?)?;
    ensure(replay(&inst.problem, counting.as_ref(), &w)?, || {
        "BrIndif witness does not replay".into()
    })?;
    let inst = load(&fixture("cycle3"))?;
    let table = inst.oracle(None);
    let report = audit_rationality(&inst.problem, table.as_ref(), 200, SEED);
    let r = report.result("Ord").ok_or("no Ord result")?;
    ensure(r.status == Status::Fail, || format!("3-cycle passes Ord:\n{report}"))?;
    let w = through_json(r.witness.as_ref().ok_or("Ord failure without witness")?)?;
    ensure(replay(&inst.problem, table.as_ref(), &w)?, || {
        "Ord witness does not replay".into()
    })?;
    Ok(format!(
        "Born passes 4 fixtures ({skipped} axioms skipped for room); counting fails BrIndif; cycle fails Ord"
    ))
}

fn forged_acts() -> Outcome {
    let mut rng = stream_rng(SEED, 8);
    let layout = Layout {
        macrostate_dims: vec![2, 2, 2, 2],
        rewards: vec![vec![0, 1], vec![2, 3]],
    };
    let mut forged = 0;
    let isometric = |u: &PartialIsometryAct| {
        let m = u.matrix();
        max_entry(&(m.adjoint() * m - DMatrix::identity(m.ncols(), m.ncols())))
    };
    for i in 0..20 {
        let p = random_problem(&mut rng, &layout);
        let psi = random_state_in(&mut rng, &p.macrostates[0].subspace)?;
        // Branching over both macrostates of the first reward.
        let a: f64 = rng.random_range(0.05..0.95);
        let weights = [a, 1.0 - a];
        let b = ActForge::new(&p).branching_act(&psi, &weights, Some(&[0, 1]))?;
        let img = image(&b, &psi);
        for (j, &t) in [0usize, 1].iter().enumerate() {
            let got = (projector(p.macrostates[t].subspace.basis()) * &img).norm_squared();
            ensure((got - weights[j]).abs() <= 1e-9, || {
                format!("case {i}: branch weight {got} for {}", weights[j])
            })?;
        }
        // Erasure of two equal-norm states of one reward.
        let x = random_state_in(&mut rng, &p.macrostates[0].subspace)?;
        let y = random_state_in(&mut rng, &p.macrostates[1].subspace)?;
        let (e1, e2) = ActForge::new(&p).erasure_pair(&x, &y)?;
        let gap = (image(&e1, &x) - image(&e2, &y)).norm();
        ensure(gap <= 1e-9, || format!("case {i}: erased images differ by {gap:e}"))?;
        let y_long = y.scaled(C64::new(1.1, 0.0));
        let mismatch = ActForge::new(&p).erasure_pair(&x, &y_long);
        ensure(matches!(mismatch, Err(Error::NormMismatch { .. })), || {
            format!("case {i}: norm gap 0.1 gave {mismatch:?}")
        })?;
        // Two reward acts aimed at the same reward, combined.
        let r1 = ActForge::new(&p).reward_act(0, 1)?;
        let r2 = ActForge::new(&p).reward_act(1, 1)?;
        let combo = ActForge::new(&p).compat_combine(&[r1.clone(), r2.clone()], CompatMode::Macrostate)?;
        for (part, retarget) in [&r1, &r2].into_iter().zip(&combo.retargets) {
            let restricted = combo.act.restrict(part.domain())?;
            let want = retarget * part.operator();
            let diff = max_entry(&(restricted.operator() - want));
            ensure(diff <= 1e-9, || {
                format!("case {i}: combined act differs on a block by {diff:e}")
            })?;
        }
        for u in [&b, &e1, &e2, &r1, &r2, &combo.act] {
            let d = isometric(u);
            ensure(d <= 1e-9, || format!("case {i}: isometry defect {d:e}"))?;
            forged += 1;
        }
    }
    Ok(format!("{forged} forged acts checked, NormMismatch raised at gap 0.1"))
}

/// Fair-coin tail `P(|c - n/2| > n/10)` as an exact ratio.
fn exact_fair_tail(n: u64) -> f64 {
    let mut row = BigUint::one();
    let mut tail = BigUint::zero();
    for c in 0..=n {
        if c > 0 {
            row = row * (n - c + 1) / c;
        }
        // |10c - 5n| > n, in integers.
        if (10 * c as i64 - 5 * n as i64).abs() > n as i64 {
            tail += &row;
        }
    }
    // Shift both sides down so they fit in an f64 without losing the ratio.
    let shift = n.saturating_sub(1000);
    let num = (tail >> shift).to_f64().unwrap();
    let den = (BigUint::one() << (n - shift)).to_f64().unwrap();
    num / den
}

fn deviation_trend() -> Outcome {
    let mut prev = f64::INFINITY;
    let mut cells = Vec::new();
    for n in [10u64, 100, 1000] {
        let got = born_deviation_norm(&[0.5, 0.5], n as usize, 0.1)?;
        let want = exact_fair_tail(n);
        ensure((got - want).abs() <= 1e-12, || {
            format!("n {n}: {got:e} vs exact {want:e}")
        })?;
        ensure(got < prev, || format!("n {n}: {got:e} does not decrease"))?;
        prev = got;
        cells.push(format!("{n}:{got:.3e}"));
    }
    Ok(cells.join(" "))
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

fn compositions(k: usize, n: u32) -> Vec<Vec<u32>> {
    if k == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|c| {
            compositions(k - 1, n - c).into_iter().map(move |mut rest| {
                rest.insert(0, c);
                rest
            })
        })
        .collect()
}

fn counting_invariance() -> Outcome {
    let cases: [(usize, Vec<Vec<f64>>); 2] = [
        (2, vec![vec![0.5, 0.5], vec![0.1, 0.9]]),
        (3, vec![vec![0.2, 0.3, 0.5]]),
    ];
    let mut checked = 0;
    for (k, weights) in cases {
        for depth in [30usize, 31, 60] {
            let mut best: Option<(BigUint, Vec<u32>)> = None;
            for v in compositions(k, depth as u32) {
                let m = factorial(depth as u64) / v.iter().map(|&c| factorial(c as u64)).product::<BigUint>();
                if best.as_ref().is_none_or(|(b, _)| m > *b) {
                    best = Some((m, v));
                }
            }
            let expected = best.expect("compositions exist").1;
            for w in &weights {
                let tree = BranchTree::grow(w, depth)?;
                let got = modal_counts(&tree);
                ensure(got == expected, || {
                    format!("k {k} depth {depth} {w:?}: mode {got:?}, exhaustive {expected:?}")
                })?;
                if depth % k == 0 {
                    let f = counting_frequencies(&tree);
                    ensure(f.iter().all(|x| (x - 1.0 / k as f64).abs() < 1e-15), || {
                        format!("frequencies {f:?}")
                    })?;
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} trees share the balanced mode"))
}

fn lattice_laws() -> Outcome {
    let dist = |a: &Subspace, b: &Subspace| max_entry(&(projector(a.basis()) - projector(b.basis())));
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let line = |v: &[f64]| orthonormalize(&[StateVector::from_real(v)], 1e-9);
    let up = line(&[1.0, 0.0])?;
    let down = line(&[0.0, 1.0])?;
    let right = line(&[h, h])?;
    let left = line(&[h, -h])?;
    let c2 = [
        Subspace::zero(2),
        up.clone(),
        down.clone(),
        right.clone(),
        left,
        Subspace::full(2),
    ];
    let mut pairs: Vec<(Subspace, Subspace)> = Vec::new();
    for a in &c2 {
        for b in &c2 {
            pairs.push((a.clone(), b.clone()));
        }
    }
    let mut rng = stream_rng(SEED, 11);
    for _ in 0..50 {
        let (a, b) = (rng.random_range(0..=8), rng.random_range(0..=8));
        pairs.push((random_subspace(&mut rng, 8, a), random_subspace(&mut rng, 8, b)));
    }
    for (i, (e, f)) in pairs.iter().enumerate() {
        let d1 = dist(&e.join(f)?.complement(), &e.complement().meet(&f.complement())?);
        let d2 = dist(&e.meet(f)?.complement(), &e.complement().join(&f.complement())?);
        ensure(d1.max(d2) <= 1e-9, || {
            format!("pair {i}: De Morgan off by {:e}", d1.max(d2))
        })?;
        let g = e.join(f)?;
        let d3 = dist(&e.join(&g.meet(&e.complement())?)?, &g);
        ensure(d3 <= 1e-9, || format!("pair {i}: orthomodularity off by {d3:e}"))?;
        // Join dimension against the rank of both bases side by side.
        let mut stacked = DMatrix::<C64>::zeros(e.ambient_dim(), e.dim() + f.dim());
        stacked.columns_mut(0, e.dim()).copy_from(e.basis());
        stacked.columns_mut(e.dim(), f.dim()).copy_from(f.basis());
        let rank = if stacked.ncols() == 0 {
            0
        } else {
            stacked
                .svd(false, false)
                .singular_values
                .iter()
                .filter(|&&s| s > 1e-7)
                .count()
        };
        ensure(g.dim() == rank, || {
            format!("pair {i}: join has dim {} but rank {rank}", g.dim())
        })?;
        ensure(e.meet(f)?.dim() == e.dim() + f.dim() - rank, || {
            format!("pair {i}: meet dimension")
        })?;
    }
    let lhs = up.meet(&right)?.join(&down.meet(&right)?)?;
    let rhs = up.join(&down)?.meet(&right)?;
    ensure(lhs.dim() == 0 && dist(&rhs, &right) <= 1e-9, || {
        "spin lattice turned out distributive".into()
    })?;
    Ok(format!(
        "{} pairs; distributivity fails on the spin fixture",
        pairs.len()
    ))
}

fn classical_suite() -> Outcome {
    let mut rng = stream_rng(SEED, 12);
    for i in 0..20 {
        let n = rng.random_range(2..=6);
        let rewards: Vec<String> = (0..n).map(|j| format!("x{j}")).collect();
        let util = UtilityTable::new(
            rewards
                .iter()
                .enumerate()
                .map(|(j, r)| {
                    (
                        r.clone(),
                        if j == 0 {
                            0.0
                        } else if j == n - 1 {
                            1.0
                        } else {
                            rng.random()
                        },
                    )
                })
                .collect(),
        );
        let got = vnm_elicit(
            &PmeuOracle { utility: util.clone() },
            &rewards,
            "x0",
            &rewards[n - 1],
            1e-6,
        )?;
        for r in &rewards {
            let err = (got.get(r)? - util.get(r)?).abs();
            ensure(err <= 1e-6, || format!("table {i}: `{r}` off by {err:e}"))?;
        }
    }
    let rewards: Vec<String> = (0..4).map(|j| format!("x{j}")).collect();
    let util = UtilityTable::new(
        rewards
            .iter()
            .zip([0.0, 0.3, 0.7, 1.0])
            .map(|(r, v)| (r.clone(), v))
            .collect(),
    );
    let lots = random_lotteries(&mut rng, &rewards, 20);
    let report = check_vnm_axioms(&PmeuOracle { utility: util }, &lots, 200, SEED)?;
    ensure(report.passed(), || format!("PMEU fails:\n{report}"))?;
    let lex = LexicographicOracle {
        keys: rewards.iter().rev().cloned().collect(),
    };
    let report = check_vnm_axioms(&lex, &lots, 200, SEED)?;
    let arch = report.result("Archimedean").ok_or("no Archimedean result")?;
    ensure(arch.status == Status::Fail, || {
        format!("lexicographic order passes Archimedean:\n{report}")
    })?;
    let w = arch.witness.as_ref().ok_or("Archimedean failure without witness")?;
    let get = |label: &str| w.lotteries.iter().find(|(l, _)| l == label).map(|(_, x)| x.clone());
    let (a, b, c) = (
        get("A").ok_or("no A")?,
        get("B").ok_or("no B")?,
        get("C").ok_or("no C")?,
    );
    for j in 1..=20 {
        let s = 0.5f64.powi(j);
        ensure(lex.compare(&b, &mix(&a, &c, s)?)? != Ordering::Greater, || {
            "witness does not replay".into()
        })?;
    }
    for n in [8usize, 64] {
        for trial in 0..10 {
            // Cells of four states with uneven masses, each cell 1/n in total.
            let mut states = Vec::new();
            let mut cells = Vec::new();
            let mut measure = BTreeMap::new();
            for c in 0..n {
                let raw: Vec<f64> = (0..4).map(|_| rng.random::<f64>() + 0.05).collect();
                let total: f64 = raw.iter().sum();
                let mut cell = BTreeSet::new();
                for (s, x) in raw.iter().enumerate() {
                    let id = format!("c{c}s{s}");
                    measure.insert(id.clone(), x / total / n as f64);
                    cell.insert(id.clone());
                    states.push(id);
                }
                cells.push(cell);
            }
            let mut event: BTreeSet<String> = states.iter().filter(|_| rng.random_bool(0.4)).cloned().collect();
            if event.is_empty() {
                event.insert(states[0].clone());
            }
            let truth: f64 = event.iter().map(|s| measure[s]).sum();
            let oracle = PlantedMeasureOracle {
                measure,
                utility: BTreeMap::from([("x".to_string(), 1.0), ("y".to_string(), 0.0)]),
            };
            let br = savage_probability(&oracle, &states, &event, &cells, "x", "y")?;
            let width = br.upper - br.lower;
            ensure((width - 1.0 / n as f64).abs() < 1e-15, || {
                format!("n {n} trial {trial}: width {width}")
            })?;
            ensure(br.lower - 1e-12 <= truth && truth <= br.upper + 1e-12, || {
                format!("n {n} trial {trial}: {truth} outside [{}, {}]", br.lower, br.upper)
            })?;
        }
    }
    Ok("20 tables round-trip; PMEU passes; lexicographic fails Archimedean; brackets hold for n 8 and 64".into())
}

fn qdt(args: &[&str]) -> Result<(Option<i32>, Vec<u8>), Box<dyn StdError>> {
    let out = Command::new(env!("CARGO_BIN_EXE_qdt"))
        .args(args)
        .env_remove("QDT_SEED")
        .output()?;
    Ok((out.status.code(), out.stdout))
}

fn cli_contract() -> Outcome {
    let f = |n: &str| fixture(n).display().to_string();
    let (min2, three, four, cycle) = (f("min2"), f("three_reward8"), f("four_reward8"), f("cycle3"));
    let (merge, overlap, nonorth, missing) = (f("merge_irrev"), f("overlap_relaxed"), f("nonorth"), f("missing_r1"));
    let matrix: Vec<(Vec<&str>, i32)> = vec![
        (vec!["validate", &min2], 0),
        (vec!["validate", &three], 0),
        (vec!["validate", &four], 0),
        (vec!["validate", &cycle], 0),
        (vec!["validate", &merge], 1),
        (vec!["validate", &nonorth], 1),
        (vec!["validate", &overlap], 1),
        (vec!["validate", &missing], 2),
        (vec!["audit-richness", &four, "--samples", "40", "--seed", "7"], 0),
        (vec!["audit-rationality", &three, "--samples", "40", "--seed", "7"], 0),
        (
            vec![
                "audit-rationality",
                &three,
                "--oracle",
                "counting",
                "--samples",
                "40",
                "--seed",
                "7",
            ],
            1,
        ),
        (vec!["audit-rationality", &cycle, "--samples", "40", "--seed", "7"], 1),
        (vec!["audit-rationality", &merge, "--samples", "40", "--seed", "7"], 2),
        (vec!["born-theorem", &four, "--samples", "40", "--seed", "7"], 0),
        (vec!["audit-rationality", &three, "--samples", "40"], 2),
        (vec!["counterexample", &merge, "--relax", "irrev", "--seed", "7"], 1),
        (
            vec!["counterexample", &overlap, "--relax", "orthmacr", "--seed", "7"],
            1,
        ),
        (
            vec![
                "counterexample",
                &four,
                "--relax",
                "orthmacr",
                "--budget",
                "100",
                "--seed",
                "7",
            ],
            0,
        ),
        (vec!["counterexample", &cycle, "--seed", "7"], 2),
        (
            vec![
                "simulate",
                "--k",
                "2",
                "--weights",
                "0.5,0.5",
                "--n",
                "10,100",
                "--eps",
                "0.1",
            ],
            0,
        ),
        (
            vec![
                "simulate",
                "--k",
                "2",
                "--weights",
                "0.5,0.6",
                "--n",
                "10",
                "--eps",
                "0.1",
            ],
            2,
        ),
        (vec!["elicit", &four], 0),
        (vec!["classical-vnm", "--seed", "7"], 0),
        (vec!["classical-vnm", "--order", "lexicographic", "--seed", "7"], 1),
    ];
    for (args, want) in &matrix {
        let (code, _) = qdt(args)?;
        ensure(code == Some(*want), || {
            format!("{args:?} exited {code:?}, expected {want}")
        })?;
    }
    let reruns: [&[&str]; 4] = [
        &[
            "audit-rationality",
            &three,
            "--oracle",
            "counting",
            "--samples",
            "40",
            "--seed",
            "7",
        ],
        &["--json", "check-lemmas", &four, "--samples", "40", "--seed", "7"],
        &["counterexample", &merge, "--relax", "irrev", "--seed", "7"],
        &["--json", "audit-richness", &min2, "--samples", "40", "--seed", "7"],
    ];
    for args in reruns {
        let a = qdt(args)?;
        let b = qdt(args)?;
        ensure(!a.1.is_empty() && a == b, || format!("{args:?} is not reproducible"))?;
    }
    Ok(format!("{} exit codes match; 4 reports byte-identical", matrix.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("born-identity", born_identity),
        ("equivalence", equivalence),
        ("dominance", dominance),
        ("nullity", nullity),
        ("utility-round-trip", utility_round_trip),
        ("standard-act", standard_act_reduction),
        ("axiom-audits", fixture_audits),
        ("richness-constructions", forged_acts),
        ("deviation-trend", deviation_trend),
        ("counting-invariance", counting_invariance),
        ("lattice-laws", lattice_laws),
        ("classical-suite", classical_suite),
        ("cli-contract", cli_contract),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg.into())
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {e} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
