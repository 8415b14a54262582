//! Preference orders over acts: the Born strategy and two deliberately
//! non-Born comparators, expected utility, standard acts, utility
//! elicitation, the reward order, null pairs and accessible-state orders.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forge::{compose_acts, ActForge};
use crate::hilbert::{pivoted_gram_schmidt, PartialIsometryAct, StateVector, C64, EPS_ORTH};
use crate::problem::{
    branch_decomposition, reward_weights, smallest_event, AccessibleState, Event, QuantumDecisionProblem,
};

/// Tie band for expected-utility comparisons.
pub const EPS_EU: f64 = 1e-9;

/// Bisection step cap per reward.
pub const MAX_BISECTION_STEPS: usize = 40;

/// Default cap on act pairs enumerated by the definitional null test.
pub const DEFAULT_MAX_NULL_PAIRS: usize = 1 << 20;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UtilityTable {
    pub values: BTreeMap<String, f64>,
}

impl UtilityTable {
    pub fn new(values: BTreeMap<String, f64>) -> Self {
        Self { values }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Self {
            values: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn get(&self, reward: &str) -> Result<f64> {
        self.values
            .get(reward)
            .copied()
            .ok_or_else(|| Error::MissingUtility(reward.to_string()))
    }

    /// Utilities indexed like `p.rewards`.
    pub fn for_problem(&self, p: &QuantumDecisionProblem) -> Result<Vec<f64>> {
        p.rewards.iter().map(|r| self.get(&r.id)).collect()
    }

    /// Checks the fixed gauge: values in `[0, 1]`, `u(r0) = 0`, `u(r1) = 1`.
    pub fn check_gauge(&self, p: &QuantumDecisionProblem) -> Result<()> {
        let u = self.for_problem(p)?;
        if u.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidArgument("utilities must lie in [0, 1]".into()));
        }
        if u[p.r0()] != 0.0 || u[p.r1()] != 1.0 {
            return Err(Error::InvalidArgument(
                "utility gauge requires u(r0) = 0 and u(r1) = 1".into(),
            ));
        }
        Ok(())
    }
}

/// A three-way comparison of acts at a state; `Greater` means the left act
/// is strictly preferred.
pub trait PreferenceOracle {
    fn name(&self) -> &str;

    fn compare(
        &self,
        p: &QuantumDecisionProblem,
        psi: &StateVector,
        left: &PartialIsometryAct,
        right: &PartialIsometryAct,
    ) -> Result<Ordering>;
}

fn image(psi: &StateVector, u: &PartialIsometryAct) -> Result<StateVector> {
    u.apply(&psi.normalized()?)
}

pub fn expected_utility(
    p: &QuantumDecisionProblem,
    psi: &StateVector,
    u: &PartialIsometryAct,
    utility: &UtilityTable,
) -> Result<f64> {
    let values = utility.for_problem(p)?;
    let w = reward_weights(p, &image(psi, u)?)?;
    Ok(w.iter().zip(&values).map(|(a, b)| a * b).sum())
}

/// Three-way comparison of two reals with the tie band.
pub fn banded(a: f64, b: f64, band: f64) -> Ordering {
    if a - b > band {
        Ordering::Greater
    } else if b - a > band {
        Ordering::Less
    } else {
        Ordering::Equal
    }
}

pub fn born_compare(
    p: &QuantumDecisionProblem,
    psi: &StateVector,
    left: &PartialIsometryAct,
    right: &PartialIsometryAct,
    utility: &UtilityTable,
) -> Result<Ordering> {
    let a = expected_utility(p, psi, left, utility)?;
    let b = expected_utility(p, psi, right, utility)?;
    Ok(banded(a, b, EPS_EU))
}

#[derive(Clone, Debug)]
pub struct BornOracle {
    pub utility: UtilityTable,
}

impl BornOracle {
    pub fn new(utility: UtilityTable) -> Self {
        Self { utility }
    }
}

impl PreferenceOracle for BornOracle {
    fn name(&self) -> &str {
        "born"
    }

    fn compare(
        &self,
        p: &QuantumDecisionProblem,
        psi: &StateVector,
        left: &PartialIsometryAct,
        right: &PartialIsometryAct,
    ) -> Result<Ordering> {
        born_compare(p, psi, left, right, &self.utility)
    }
}

/// Branch counting: every macrostate branch of the final state counts
/// equally regardless of amplitude, and among equal averages more branches
/// are preferred.
#[derive(Clone, Debug)]
pub struct CountingOracle {
    pub utility: UtilityTable,
}

impl CountingOracle {
    pub fn new(utility: UtilityTable) -> Self {
        Self { utility }
    }

    /// Branch-averaged utility of the final state and its branch count.
    pub fn score(&self, p: &QuantumDecisionProblem, psi: &StateVector, u: &PartialIsometryAct) -> Result<(f64, usize)> {
        let values = self.utility.for_problem(p)?;
        let branches = branch_decomposition(p, &image(psi, u)?)?;
        let total: f64 = branches.iter().map(|(m, _)| values[p.reward_of(*m)]).sum();
        Ok((total / branches.len() as f64, branches.len()))
    }
}

impl PreferenceOracle for CountingOracle {
    fn name(&self) -> &str {
        "counting"
    }

    fn compare(
        &self,
        p: &QuantumDecisionProblem,
        psi: &StateVector,
        left: &PartialIsometryAct,
        right: &PartialIsometryAct,
    ) -> Result<Ordering> {
        let (a, na) = self.score(p, psi, left)?;
        let (b, nb) = self.score(p, psi, right)?;
        Ok(banded(a, b, EPS_EU).then(na.cmp(&nb)))
    }
}

#[derive(Clone, Debug)]
pub struct PreferenceOverride {
    pub left: PartialIsometryAct,
    pub right: PartialIsometryAct,
    pub order: Ordering,
}

/// The Born order with explicit verdicts for listed act pairs.
#[derive(Clone, Debug)]
pub struct TableOracle {
    pub base: BornOracle,
    pub overrides: Vec<PreferenceOverride>,
}

impl TableOracle {
    fn lookup(&self, left: &PartialIsometryAct, right: &PartialIsometryAct) -> Option<Ordering> {
        self.overrides.iter().find_map(|o| {
            if o.left.approx_eq(left) && o.right.approx_eq(right) {
                Some(o.order)
            } else if o.left.approx_eq(right) && o.right.approx_eq(left) {
                Some(o.order.reverse())
            } else {
                None
            }
        })
    }
}

impl PreferenceOracle for TableOracle {
    fn name(&self) -> &str {
        "table"
    }

    fn compare(
        &self,
        p: &QuantumDecisionProblem,
        psi: &StateVector,
        left: &PartialIsometryAct,
        right: &PartialIsometryAct,
    ) -> Result<Ordering> {
        match self.lookup(left, right) {
            Some(o) => Ok(o),
            None => self.base.compare(p, psi, left, right),
        }
    }
}

/// A standard act of weight `alpha` at `psi`.
pub fn make_standard_act(p: &QuantumDecisionProblem, psi: &StateVector, alpha: f64) -> Result<PartialIsometryAct> {
    ActForge::new(p).standard_act(psi, alpha)
}

/// Squared `r1` weight of the image of `psi`.
pub fn standard_weight(p: &QuantumDecisionProblem, psi: &StateVector, u: &PartialIsometryAct) -> Result<f64> {
    Ok(reward_weights(p, &image(psi, u)?)?[p.r1()])
}

fn columns(m: &DMatrix<C64>) -> Vec<DVector<C64>> {
    m.column_iter().map(|c| c.into_owned()).collect()
}

fn complete(dim: usize, taken: &[DVector<C64>]) -> Vec<DVector<C64>> {
    let mut res = columns(&DMatrix::identity(dim, dim));
    for r in &mut res {
        for _ in 0..2 {
            for q in taken {
                let c = q.dotc(r);
                *r -= q * c;
            }
        }
    }
    pivoted_gram_schmidt(res, 1e-6, dim - taken.len())
}

fn free_directions(
    p: &QuantumDecisionProblem,
    reward: usize,
    taken: &[DVector<C64>],
    count: usize,
) -> Result<Vec<DVector<C64>>> {
    let mut res: Vec<DVector<C64>> = p.rewards[reward]
        .members
        .iter()
        .flat_map(|&m| columns(p.macrostates[m].subspace.basis()))
        .collect();
    for r in &mut res {
        for _ in 0..2 {
            for q in taken {
                let c = q.dotc(r);
                *r -= q * c;
            }
        }
    }
    let free = pivoted_gram_schmidt(res, 1e-6, count);
    if free.len() < count {
        return Err(Error::InsufficientDimension(format!(
            "reward `{}` lacks {count} free direction(s) for the reduction",
            p.rewards[reward].id
        )));
    }
    Ok(free)
}

/// `W ∘ U` with `W` a unitary that keeps the `r0` and `r1` branches of `Uψ`
/// and turns each other branch into a standard branch of weight `u(r)`, so
/// the result is standard of weight `EU_ψ(U)`.
pub fn reduce_to_standard(
    p: &QuantumDecisionProblem,
    psi: &StateVector,
    u: &PartialIsometryAct,
    utility: &UtilityTable,
) -> Result<PartialIsometryAct> {
    let values = utility.for_problem(p)?;
    let phi = image(psi, u)?;
    let (r0, r1) = (p.r0(), p.r1());
    let mut kept = Vec::new();
    let mut middle = Vec::new();
    for (m, branch) in branch_decomposition(p, &phi)? {
        let head = branch.normalized()?.into_vector();
        let r = p.reward_of(m);
        if r == r0 || r == r1 {
            kept.push(head);
        } else {
            middle.push((head, values[r]));
        }
    }
    let f0 = free_directions(p, r0, &kept, middle.len())?;
    let f1 = free_directions(p, r1, &kept, middle.len())?;
    let mut sources = kept.clone();
    let mut targets = kept;
    for ((head, w), (a, b)) in middle.into_iter().zip(f0.into_iter().zip(f1)) {
        sources.push(head);
        targets.push(a * C64::new((1.0 - w).sqrt(), 0.0) + b * C64::new(w.sqrt(), 0.0));
    }
    let d = p.dim;
    let rest_src = complete(d, &sources);
    let rest_dst = complete(d, &targets);
    sources.extend(rest_src);
    targets.extend(rest_dst);
    let mut w = DMatrix::zeros(d, d);
    for (t, s) in targets.iter().zip(&sources) {
        w += t * s.adjoint();
    }
    PartialIsometryAct::from_operator(u.domain().clone(), &(w * u.operator()))
}

/// The state and macrostate used to compare reward acts: the first basis
/// vector of the lowest-dimensional (then lowest-index) macrostate.
pub fn probe(p: &QuantumDecisionProblem) -> (usize, StateVector) {
    let m = (0..p.macrostates.len())
        .min_by_key(|&i| (p.macrostates[i].subspace.dim(), i))
        .expect("problem has macrostates");
    probe_at(p, m)
}

pub fn probe_at(p: &QuantumDecisionProblem, m: usize) -> (usize, StateVector) {
    let v = p.macrostates[m].subspace.basis().column(0).into_owned();
    (m, StateVector::from_vector(v))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ElicitationStats {
    /// Bisection steps spent per reward id.
    pub steps: BTreeMap<String, usize>,
}

pub fn elicit_utility(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, tol: f64) -> Result<UtilityTable> {
    let (m, psi) = probe(p);
    elicit_utility_at(p, oracle, tol, m, &psi).map(|(u, _)| u)
}

/// Bisects `sup{α : V_α ≼ R}` for each reward act `R` at the probe `psi`
/// inside macrostate `m`.
pub fn elicit_utility_at(
    p: &QuantumDecisionProblem,
    oracle: &dyn PreferenceOracle,
    tol: f64,
    m: usize,
    psi: &StateVector,
) -> Result<(UtilityTable, ElicitationStats)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let mut values = BTreeMap::new();
    let mut stats = ElicitationStats::default();
    for (ri, reward) in p.rewards.iter().enumerate() {
        if reward.is_r0 || reward.is_r1 {
            values.insert(reward.id.clone(), if reward.is_r1 { 1.0 } else { 0.0 });
            stats.steps.insert(reward.id.clone(), 0);
            continue;
        }
        let target = ActForge::new(p).reward_act(m, ri)?;
        let at_most = |alpha: f64| -> Result<bool> {
            let v = make_standard_act(p, psi, alpha)?;
            Ok(oracle.compare(p, psi, &v, &target)? != Ordering::Greater)
        };
        if !at_most(0.0)? {
            return Err(Error::NonMonotoneOracle(format!(
                "the weight-0 standard act beats the reward act for `{}`",
                reward.id
            )));
        }
        if oracle.compare(p, psi, &make_standard_act(p, psi, 1.0)?, &target)? == Ordering::Less {
            return Err(Error::NonMonotoneOracle(format!(
                "the reward act for `{}` beats the weight-1 standard act",
                reward.id
            )));
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut steps = 0;
        while hi - lo > tol && steps < MAX_BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if at_most(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
            steps += 1;
        }
        values.insert(reward.id.clone(), 0.5 * (lo + hi));
        stats.steps.insert(reward.id.clone(), steps);
    }
    Ok((UtilityTable::new(values), stats))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardOrder {
    /// Reward indices from most to least preferred.
    pub ranking: Vec<usize>,
    /// `relation[a][b]` compares the reward act for `a` with the one for `b`.
    pub relation: Vec<Vec<Ordering>>,
}

pub fn reward_order(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle) -> Result<RewardOrder> {
    let (m, psi) = probe(p);
    reward_order_at(p, oracle, m, &psi)
}

pub fn reward_order_at(
    p: &QuantumDecisionProblem,
    oracle: &dyn PreferenceOracle,
    m: usize,
    psi: &StateVector,
) -> Result<RewardOrder> {
    let n = p.rewards.len();
    let acts = (0..n)
        .map(|r| ActForge::new(p).reward_act(m, r))
        .collect::<Result<Vec<_>>>()?;
    let mut relation = vec![vec![Ordering::Equal; n]; n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                relation[a][b] = oracle.compare(p, psi, &acts[a], &acts[b])?;
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            if relation[a][b] != relation[b][a].reverse() {
                return Err(Error::IntransitiveOracle(format!(
                    "asymmetric verdicts between `{}` and `{}`",
                    p.rewards[a].id, p.rewards[b].id
                )));
            }
            for c in 0..n {
                if relation[a][b] != Ordering::Less
                    && relation[b][c] != Ordering::Less
                    && relation[a][c] == Ordering::Less
                {
                    return Err(Error::IntransitiveOracle(format!(
                        "`{}` ≽ `{}` ≽ `{}` but `{}` ≺ `{}`",
                        p.rewards[a].id, p.rewards[b].id, p.rewards[c].id, p.rewards[a].id, p.rewards[c].id
                    )));
                }
            }
        }
    }
    let mut ranking: Vec<usize> = (0..n).collect();
    ranking.sort_by(|&a, &b| relation[b][a].then(a.cmp(&b)));
    Ok(RewardOrder { ranking, relation })
}

/// `V ≻_φ V'` at an accessible state, through its witness: compares
/// `V ∘ W` with `V' ∘ W` at the witness's source state.
pub fn accessible_compare(
    p: &QuantumDecisionProblem,
    phi: &AccessibleState,
    v: &PartialIsometryAct,
    v_prime: &PartialIsometryAct,
    oracle: &dyn PreferenceOracle,
) -> Result<Ordering> {
    let left = compose_acts(p, v, &phi.witness_act)?;
    let right = compose_acts(p, v_prime, &phi.witness_act)?;
    oracle.compare(p, &phi.source, &left, &right)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NullMethod {
    Criterion,
    Definitional,
}

/// Acts at the witness's smallest event that send the head of each branch
/// macrostate either to an `r0` slot or an `r1` slot, one act per choice
/// pattern, plus the identity. Acts in the catalog agree on the complement
/// of an event exactly when their patterns agree outside it.
pub fn nullity_catalog(p: &QuantumDecisionProblem, phi: &AccessibleState) -> Result<Vec<PartialIsometryAct>> {
    let event = smallest_event(p, &phi.witness_act);
    let domain = p.event_subspace(event);
    let members: Vec<usize> = event.members().collect();
    let b = members.len();
    if b > 20 {
        return Err(Error::CatalogTooLarge {
            pairs: usize::MAX,
            max: DEFAULT_MAX_NULL_PAIRS,
        });
    }
    let d = p.dim;
    let low = free_directions(p, p.r0(), &[], b)?;
    let high = free_directions(p, p.r1(), &[], b)?;
    let mut slots = low.clone();
    slots.extend(high.iter().cloned());
    if d < domain.dim() + b {
        return Err(Error::InsufficientDimension(format!(
            "definitional null test needs {} dimensions, the space has {d}",
            domain.dim() + b
        )));
    }
    let rest_images = complete(d, &slots);
    let mut frames = Vec::with_capacity(b);
    for &m in &members {
        let sub = &p.macrostates[m].subspace;
        let branch = sub.project(&phi.state)?;
        let head = if branch.norm() > EPS_ORTH {
            branch.normalized()?.into_vector()
        } else {
            sub.basis().column(0).into_owned()
        };
        let mut rest = columns(sub.basis());
        for r in &mut rest {
            let c = head.dotc(r);
            *r -= &head * c;
        }
        frames.push((head, pivoted_gram_schmidt(rest, 1e-6, sub.dim() - 1)));
    }
    let mut catalog = vec![PartialIsometryAct::identity(domain.clone())];
    for pattern in 0u32..(1 << b) {
        let mut op = DMatrix::zeros(d, d);
        let mut next_rest = rest_images.iter();
        for (i, (head, rest)) in frames.iter().enumerate() {
            let slot = if pattern & (1 << i) != 0 { &high[i] } else { &low[i] };
            op += slot * head.adjoint();
            for r in rest {
                let img = next_rest.next().expect("dimension checked above");
                op += img * r.adjoint();
            }
        }
        catalog.push(PartialIsometryAct::from_operator(domain.clone(), &op)?);
    }
    Ok(catalog)
}

/// Whether `(E, φ)` is a null pair, either by the projection criterion or
/// by exhausting catalog act pairs that agree on `E⊥`.
pub fn is_null_pair(
    p: &QuantumDecisionProblem,
    event: Event,
    phi: &AccessibleState,
    method: NullMethod,
    oracle: &dyn PreferenceOracle,
    catalog: Option<&[PartialIsometryAct]>,
    max_pairs: usize,
) -> Result<bool> {
    let e = p.event_subspace(event);
    match method {
        NullMethod::Criterion => {
            let scale = phi.state.norm();
            Ok(e.project(&phi.state)?.norm() <= EPS_ORTH * scale.max(1.0))
        }
        NullMethod::Definitional => {
            let owned;
            let acts = match catalog {
                Some(c) => c,
                None => {
                    owned = nullity_catalog(p, phi)?;
                    &owned
                }
            };
            let pairs = acts.len() * acts.len().saturating_sub(1) / 2;
            if pairs > max_pairs {
                return Err(Error::CatalogTooLarge { pairs, max: max_pairs });
            }
            let outside = e.complement();
            for i in 0..acts.len() {
                let restricted = acts[i].domain().meet(&outside)?;
                for j in i + 1..acts.len() {
                    if acts[i].disagreement_on(&acts[j], &restricted) > EPS_ORTH {
                        continue;
                    }
                    if accessible_compare(p, phi, &acts[i], &acts[j], oracle)? != Ordering::Equal {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
    }
}
