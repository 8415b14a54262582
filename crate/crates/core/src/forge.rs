//! Constructive acts: identity, restriction, composition, reward, branching,
//! erasure and standard acts, and compatible combination of acts on
//! orthogonal domains.
//!
//! Every construction reserves the directions it lands on in a per-macrostate
//! occupied set, so later constructions from the same forge are placed on
//! fresh orthogonal directions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{pivoted_gram_schmidt, PartialIsometryAct, StateVector, Subspace, C64, EPS_NORM, EPS_ORTH};
use crate::problem::{smallest_event, Event, QuantumDecisionProblem};

/// Residual below which a candidate direction counts as already used.
const FRESH_TOL: f64 = 1e-6;

pub fn validate_weights(weights: &[f64]) -> Result<()> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w <= 0.0) || (sum - 1.0).abs() > 1e-12 {
        return Err(Error::WeightSumError { sum });
    }
    Ok(())
}

fn columns(m: &DMatrix<C64>) -> Vec<DVector<C64>> {
    m.column_iter().map(|c| c.into_owned()).collect()
}

fn strip(v: &mut DVector<C64>, against: &[DVector<C64>]) {
    for _ in 0..2 {
        for q in against {
            let c = q.dotc(v);
            *v -= q * c;
        }
    }
}

fn outer_sum(images: &[DVector<C64>], frame: &[DVector<C64>], dim: usize) -> DMatrix<C64> {
    let mut op = DMatrix::zeros(dim, dim);
    for (img, f) in images.iter().zip(frame) {
        op += img * f.adjoint();
    }
    op
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CompatMode {
    /// Colliding components move to unclaimed macrostates of the same
    /// reward, so restrictions to distinct blocks keep orthogonal smallest
    /// events.
    #[default]
    Macrostate,
    /// Colliding components move to unclaimed directions; blocks may share
    /// a macrostate.
    Direction,
}

#[derive(Clone, Debug)]
pub struct Combination {
    pub act: PartialIsometryAct,
    /// Per-input `d × d` maps applied to each act's images; the combined act
    /// restricted to block `i` equals `retargets[i] ∘ acts[i]`.
    pub retargets: Vec<DMatrix<C64>>,
}

#[derive(Clone, Debug)]
pub enum ActRequest {
    Identity {
        event: Event,
    },
    Restrict {
        act: PartialIsometryAct,
        event: Event,
    },
    Compose {
        outer: PartialIsometryAct,
        inner: PartialIsometryAct,
    },
    Reward {
        macrostate: usize,
        reward: usize,
    },
    Branching {
        state: StateVector,
        weights: Vec<f64>,
        targets: Option<Vec<usize>>,
    },
    ErasurePair {
        first: StateVector,
        second: StateVector,
    },
    Compat {
        acts: Vec<PartialIsometryAct>,
        mode: CompatMode,
    },
}

#[derive(Clone, Debug)]
pub struct ActForge<'p> {
    problem: &'p QuantumDecisionProblem,
    occupied: Vec<Vec<DVector<C64>>>,
}

impl<'p> ActForge<'p> {
    pub fn new(problem: &'p QuantumDecisionProblem) -> Self {
        Self {
            problem,
            occupied: vec![Vec::new(); problem.macrostates.len()],
        }
    }

    pub fn problem(&self) -> &'p QuantumDecisionProblem {
        self.problem
    }

    /// Dimensions of macrostate `m` not yet used by a construction.
    pub fn spare(&self, m: usize) -> usize {
        self.problem.macrostates[m].subspace.dim() - self.occupied[m].len()
    }

    pub fn reset(&mut self) {
        for o in &mut self.occupied {
            o.clear();
        }
    }

    /// Marks the span of `vectors` inside macrostate `m` as used.
    pub fn reserve(&mut self, m: usize, vectors: &[StateVector]) {
        let mut all = self.occupied[m].clone();
        all.extend(vectors.iter().map(|v| v.as_vector().clone()));
        let cap = self.problem.macrostates[m].subspace.dim();
        self.occupied[m] = pivoted_gram_schmidt(all, FRESH_TOL, cap);
    }

    fn allocate(&mut self, m: usize) -> Result<DVector<C64>> {
        if self.spare(m) == 0 {
            return Err(Error::InsufficientDimension(format!(
                "macrostate `{}` has no spare dimension",
                self.problem.macrostates[m].id
            )));
        }
        let mut residuals = columns(self.problem.macrostates[m].subspace.basis());
        for r in &mut residuals {
            strip(r, &self.occupied[m]);
        }
        let mut picked = pivoted_gram_schmidt(residuals, FRESH_TOL, 1);
        let Some(mut v) = picked.pop() else {
            return Err(Error::InsufficientDimension(format!(
                "macrostate `{}` has no spare dimension",
                self.problem.macrostates[m].id
            )));
        };
        strip(&mut v, &self.occupied[m]);
        let n = v.norm();
        v /= C64::new(n, 0.0);
        self.occupied[m].push(v.clone());
        Ok(v)
    }

    fn allocate_from(&mut self, spill: &[usize]) -> Result<DVector<C64>> {
        match spill.iter().find(|&&m| self.spare(m) > 0) {
            Some(&m) => self.allocate(m),
            None => Err(Error::InsufficientDimension(
                "target macrostates have no spare dimension left".into(),
            )),
        }
    }

    fn spare_total(&self, ms: &[usize]) -> usize {
        ms.iter().map(|&m| self.spare(m)).sum()
    }

    /// Builds an act on `domain`. With a `lead` direction, the lead maps to
    /// `Σ amplitudes[i]·anchors[i]` and the rest of the domain maps to the
    /// unused part of the anchors' span, then to fresh spill directions.
    /// Without one, the domain's canonical basis maps onto `anchors`
    /// followed by fresh spill directions.
    fn embed(
        &mut self,
        domain: &Subspace,
        lead: Option<&DVector<C64>>,
        anchors: &[DVector<C64>],
        amplitudes: &[f64],
        spill: &[usize],
    ) -> Result<PartialIsometryAct> {
        let d = domain.ambient_dim();
        let k = domain.dim();
        let mut frame = Vec::with_capacity(k);
        let mut images = Vec::with_capacity(k);
        match lead {
            Some(psi_hat) => {
                frame.push(psi_hat.clone());
                let mut rest = columns(domain.basis());
                for r in &mut rest {
                    strip(r, std::slice::from_ref(psi_hat));
                }
                frame.extend(pivoted_gram_schmidt(rest, FRESH_TOL, k - 1));
                let mut v = DVector::zeros(d);
                for (a, amp) in anchors.iter().zip(amplitudes) {
                    v += a * C64::new(*amp, 0.0);
                }
                let n = v.norm();
                v /= C64::new(n, 0.0);
                let mut leftovers = anchors.to_vec();
                for l in &mut leftovers {
                    strip(l, std::slice::from_ref(&v));
                }
                let leftovers = pivoted_gram_schmidt(leftovers, FRESH_TOL, k - 1);
                images.push(v);
                images.extend(leftovers);
            }
            None => {
                frame.extend(columns(domain.basis()));
                images.extend(anchors.iter().take(k).cloned());
            }
        }
        while images.len() < k {
            images.push(self.allocate_from(spill)?);
        }
        PartialIsometryAct::from_operator(domain.clone(), &outer_sum(&images, &frame, d))
    }

    fn containing(&self, psi: &StateVector) -> Result<usize> {
        self.problem
            .macrostate_containing(psi)
            .ok_or_else(|| Error::DomainMismatch("state is not inside a single macrostate".into()))
    }

    pub fn identity_act(&self, e: &Subspace) -> Result<PartialIsometryAct> {
        identity_act(e)
    }

    pub fn restrict_act(&self, u: &PartialIsometryAct, f: &Subspace) -> Result<PartialIsometryAct> {
        u.restrict(f)
    }

    /// `outer ∘ inner`, requiring `outer` to be available at the smallest
    /// event containing the range of `inner`.
    pub fn compose_acts(&self, outer: &PartialIsometryAct, inner: &PartialIsometryAct) -> Result<PartialIsometryAct> {
        compose_acts(self.problem, outer, inner)
    }

    pub fn reward_act(&mut self, m: usize, r: usize) -> Result<PartialIsometryAct> {
        let p = self.problem;
        let reward = &p.rewards[r];
        let source = &p.macrostates[m].subspace;
        if reward.members.contains(&m) {
            return identity_act(source);
        }
        let k = source.dim();
        let Some(&host) = reward.members.iter().find(|&&n| self.spare(n) >= k) else {
            return Err(Error::InsufficientDimension(format!(
                "no member of reward `{}` can host the {k} dimension(s) of `{}`",
                reward.id, p.macrostates[m].id
            )));
        };
        let anchors = (0..k).map(|_| self.allocate(host)).collect::<Result<Vec<_>>>()?;
        self.embed(source, None, &anchors, &[], &[])
    }

    /// An act at the macrostate containing `psi` splitting it over the
    /// targets with squared weights `weights`.
    pub fn branching_act(
        &mut self,
        psi: &StateVector,
        weights: &[f64],
        targets: Option<&[usize]>,
    ) -> Result<PartialIsometryAct> {
        validate_weights(weights)?;
        let p = self.problem;
        let psi_hat = psi.normalized()?;
        let m = self.containing(psi)?;
        let r = p.reward_of(m);
        let members = &p.rewards[r].members;
        let k = p.macrostates[m].subspace.dim();
        let targets: Vec<usize> = match targets {
            Some(t) => {
                if t.len() != weights.len() {
                    return Err(Error::InvalidArgument(format!(
                        "{} weights for {} targets",
                        weights.len(),
                        t.len()
                    )));
                }
                for (i, n) in t.iter().enumerate() {
                    if !members.contains(n) || t[..i].contains(n) {
                        return Err(Error::DomainMismatch(
                            "branch targets must be distinct members of the state's reward".into(),
                        ));
                    }
                }
                t.to_vec()
            }
            None => {
                let t: Vec<usize> = members
                    .iter()
                    .copied()
                    .filter(|&n| self.spare(n) > 0)
                    .take(weights.len())
                    .collect();
                if t.len() < weights.len() {
                    return Err(Error::InsufficientDimension(format!(
                        "reward `{}` has {} macrostates with spare dimension, {} branches requested",
                        p.rewards[r].id,
                        t.len(),
                        weights.len()
                    )));
                }
                t
            }
        };
        if targets.iter().any(|&n| self.spare(n) == 0) || self.spare_total(&targets) < k {
            return Err(Error::InsufficientDimension(
                "branch targets cannot host the source macrostate".into(),
            ));
        }
        let anchors = targets.iter().map(|&n| self.allocate(n)).collect::<Result<Vec<_>>>()?;
        let amplitudes: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let domain = p.macrostates[m].subspace.clone();
        self.embed(&domain, Some(psi_hat.as_vector()), &anchors, &amplitudes, &targets)
    }

    /// Two acts sending equal-norm states of the same reward to one common
    /// state inside the reward's erasure macrostate.
    pub fn erasure_pair(
        &mut self,
        psi1: &StateVector,
        psi2: &StateVector,
    ) -> Result<(PartialIsometryAct, PartialIsometryAct)> {
        let (n1, n2) = (psi1.norm(), psi2.norm());
        if (n1 - n2).abs() > EPS_NORM {
            return Err(Error::NormMismatch { left: n1, right: n2 });
        }
        let h1 = psi1.normalized()?;
        let h2 = psi2.normalized()?;
        let p = self.problem;
        let m1 = self.containing(psi1)?;
        let m2 = self.containing(psi2)?;
        let r = p.reward_of(m1);
        if p.reward_of(m2) != r {
            return Err(Error::DomainMismatch(
                "erasure states must lie in the same reward".into(),
            ));
        }
        let e = p.rewards[r].erasure;
        let need = p.macrostates[m1].subspace.dim().max(p.macrostates[m2].subspace.dim());
        if self.spare(e) < need {
            return Err(Error::InsufficientDimension(format!(
                "erasure macrostate `{}` has {} spare dimension(s), {need} needed",
                p.macrostates[e].id,
                self.spare(e)
            )));
        }
        let snapshot = self.occupied.clone();
        let f = self.allocate(e)?;
        let d1 = p.macrostates[m1].subspace.clone();
        let u1 = self.embed(&d1, Some(h1.as_vector()), std::slice::from_ref(&f), &[1.0], &[e])?;
        let after_first = std::mem::replace(&mut self.occupied, snapshot);
        let f2 = self.allocate(e)?;
        let d2 = p.macrostates[m2].subspace.clone();
        let u2 = self.embed(&d2, Some(h2.as_vector()), std::slice::from_ref(&f2), &[1.0], &[e])?;
        for (m, vs) in after_first.into_iter().enumerate() {
            let extra: Vec<StateVector> = vs.into_iter().map(StateVector::from_vector).collect();
            self.reserve(m, &extra);
        }
        Ok((u1, u2))
    }

    /// An act at the smallest event containing `psi` whose image of `psi`
    /// lies in `r0 ∨ r1` with squared `r1` weight `alpha`.
    pub fn standard_act(&mut self, psi: &StateVector, alpha: f64) -> Result<PartialIsometryAct> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("weight {alpha} outside [0, 1]")));
        }
        let p = self.problem;
        let psi_hat = psi.normalized()?;
        let domain = p.event_subspace(p.support_event(psi));
        let low = p.rewards[p.r0()].members.clone();
        let high = p.rewards[p.r1()].members.clone();
        let spill: Vec<usize> = low.iter().chain(high.iter()).copied().collect();
        let k = domain.dim();
        let h0 = low.iter().copied().find(|&m| self.spare(m) > 0);
        let h1 = high.iter().copied().find(|&m| self.spare(m) > 0);
        let (Some(h0), Some(h1)) = (h0, h1) else {
            return Err(Error::InsufficientDimension(
                "r0 and r1 both need a spare dimension".into(),
            ));
        };
        if self.spare_total(&spill) < k.max(2) {
            return Err(Error::InsufficientDimension(format!(
                "r0 ∨ r1 cannot host a {k}-dimensional domain"
            )));
        }
        let f0 = self.allocate(h0)?;
        let f1 = self.allocate(h1)?;
        self.embed(
            &domain,
            Some(psi_hat.as_vector()),
            &[f0, f1],
            &[(1.0 - alpha).sqrt(), alpha.sqrt()],
            &spill,
        )
    }

    /// Joins acts on pairwise-orthogonal domains into one act, moving
    /// colliding images out of each other's way.
    pub fn compat_combine(&self, acts: &[PartialIsometryAct], mode: CompatMode) -> Result<Combination> {
        compat_combine(self.problem, acts, mode)
    }

    pub fn request(&mut self, req: ActRequest) -> Result<Vec<PartialIsometryAct>> {
        let p = self.problem;
        Ok(match req {
            ActRequest::Identity { event } => vec![identity_act(&p.event_subspace(event))?],
            ActRequest::Restrict { act, event } => vec![act.restrict(&p.event_subspace(event))?],
            ActRequest::Compose { outer, inner } => vec![compose_acts(p, &outer, &inner)?],
            ActRequest::Reward { macrostate, reward } => vec![self.reward_act(macrostate, reward)?],
            ActRequest::Branching {
                state,
                weights,
                targets,
            } => {
                vec![self.branching_act(&state, &weights, targets.as_deref())?]
            }
            ActRequest::ErasurePair { first, second } => {
                let (a, b) = self.erasure_pair(&first, &second)?;
                vec![a, b]
            }
            ActRequest::Compat { acts, mode } => vec![compat_combine(p, &acts, mode)?.act],
        })
    }
}

pub fn identity_act(e: &Subspace) -> Result<PartialIsometryAct> {
    if e.is_zero() {
        return Err(Error::ZeroSubspace);
    }
    Ok(PartialIsometryAct::identity(e.clone()))
}

pub fn compose_acts(
    p: &QuantumDecisionProblem,
    outer: &PartialIsometryAct,
    inner: &PartialIsometryAct,
) -> Result<PartialIsometryAct> {
    let needed = p.event_subspace(smallest_event(p, inner));
    if !needed.is_subspace_of(outer.domain()) {
        return Err(Error::DomainMismatch(
            "outer act is not available at the inner act's smallest event".into(),
        ));
    }
    inner.then(outer)
}

fn component(p: &QuantumDecisionProblem, m: usize, images: &DMatrix<C64>) -> Subspace {
    Subspace::from_columns(&(p.macrostate_projector(m) * images), EPS_ORTH)
}

fn map_onto(from: &Subspace, to: &[DVector<C64>]) -> DMatrix<C64> {
    let d = from.ambient_dim();
    outer_sum(to, &columns(from.basis()), d)
}

pub fn compat_combine(
    p: &QuantumDecisionProblem,
    acts: &[PartialIsometryAct],
    mode: CompatMode,
) -> Result<Combination> {
    let d = p.dim;
    let Some(first) = acts.first() else {
        return Err(Error::InvalidArgument("nothing to combine".into()));
    };
    if acts.len() == 1 {
        return Ok(Combination {
            act: first.clone(),
            retargets: vec![DMatrix::identity(d, d)],
        });
    }
    for i in 0..acts.len() {
        for j in i + 1..acts.len() {
            if !acts[i].domain().is_orthogonal_to(acts[j].domain()) {
                return Err(Error::DomainMismatch(format!(
                    "domains of acts {i} and {j} are not orthogonal"
                )));
            }
        }
    }
    let mut claimed_event = Event::EMPTY;
    let mut claimed_dirs: Vec<DVector<C64>> = Vec::new();
    let mut retargets = Vec::with_capacity(acts.len());
    let mut op = DMatrix::zeros(d, d);
    let mut domain = Subspace::zero(d);
    for (i, u) in acts.iter().enumerate() {
        let ev = smallest_event(p, u);
        let mut r = DMatrix::<C64>::identity(d, d);
        let mut used_here = ev;
        for n in ev.members() {
            let comp = component(p, n, u.matrix());
            let collides = match mode {
                CompatMode::Macrostate => claimed_event.contains(n),
                CompatMode::Direction => claimed_dirs.iter().any(|c| {
                    comp.basis()
                        .column_iter()
                        .any(|b| c.dotc(&b.into_owned()).norm() > EPS_ORTH)
                }),
            };
            if !collides {
                continue;
            }
            let reward = p.reward_of(n);
            let mut candidates = vec![n];
            candidates.extend(p.rewards[reward].members.iter().copied().filter(|&x| x != n));
            let mut placed = None;
            for cand in candidates {
                let free = match mode {
                    CompatMode::Macrostate => {
                        if claimed_event.contains(cand) || used_here.contains(cand) {
                            continue;
                        }
                        columns(p.macrostates[cand].subspace.basis())
                    }
                    CompatMode::Direction => {
                        if cand != n && used_here.contains(cand) {
                            continue;
                        }
                        let mut res = columns(p.macrostates[cand].subspace.basis());
                        for v in &mut res {
                            strip(v, &claimed_dirs);
                        }
                        pivoted_gram_schmidt(res, FRESH_TOL, comp.dim())
                    }
                };
                if free.len() >= comp.dim() {
                    placed = Some((cand, free[..comp.dim()].to_vec()));
                    break;
                }
            }
            let Some((cand, targets)) = placed else {
                return Err(Error::CannotOrthogonalize(format!(
                    "no room in reward `{}` for the image of act {i} in `{}`",
                    p.rewards[reward].id, p.macrostates[n].id
                )));
            };
            used_here = used_here.join(Event::single(cand));
            r -= comp.projector();
            r += map_onto(&comp, &targets);
        }
        let image = &r * u.matrix();
        op += &image * u.domain().basis().adjoint();
        domain = domain.join(u.domain())?;
        let final_act = PartialIsometryAct::new(u.domain().clone(), image)?;
        claimed_event = claimed_event.join(smallest_event(p, &final_act));
        let mut dirs = claimed_dirs.clone();
        dirs.extend(columns(final_act.matrix()));
        claimed_dirs = pivoted_gram_schmidt(dirs, FRESH_TOL, d);
        retargets.push(r);
    }
    let act = PartialIsometryAct::from_operator(domain, &op).map_err(|e| match e {
        Error::NotIsometric { defect } => {
            Error::CannotOrthogonalize(format!("combined images are not orthogonal (defect {defect:.3e})"))
        }
        other => other,
    })?;
    Ok(Combination { act, retargets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::tests::{coordinate_macrostate, min2, reward};
    use crate::problem::{reward_weights, QuantumDecisionProblem};

    fn branchy() -> QuantumDecisionProblem {
        QuantumDecisionProblem::new(
            6,
            vec![
                coordinate_macrostate(6, "A", &[0]),
                coordinate_macrostate(6, "B1", &[1, 2]),
                coordinate_macrostate(6, "B2", &[3]),
                coordinate_macrostate(6, "B3", &[4, 5]),
            ],
            vec![reward("r0", &[0], true, false), reward("r1", &[1, 2, 3], false, true)],
        )
    }

    #[test]
    fn identity_of_zero_subspace_fails() {
        assert!(matches!(identity_act(&Subspace::zero(3)), Err(Error::ZeroSubspace)));
    }

    #[test]
    fn quarter_branching() {
        let p = branchy();
        let mut forge = ActForge::new(&p);
        let psi = StateVector::basis(6, 3);
        let u = forge.branching_act(&psi, &[0.25, 0.75], Some(&[1, 3])).unwrap();
        let out = u.apply(&psi).unwrap();
        let b1 = p.macrostates[1].subspace.project(&out).unwrap();
        let b3 = p.macrostates[3].subspace.project(&out).unwrap();
        assert!((b1.norm() - 0.5).abs() < 1e-12);
        assert!((b3.norm_sqr() - 0.75).abs() < 1e-12);
        assert_eq!(smallest_event(&p, &u), Event::from_members([1, 3]));
    }

    #[test]
    fn bad_weights_are_rejected() {
        let p = branchy();
        let mut forge = ActForge::new(&p);
        let err = forge
            .branching_act(&StateVector::basis(6, 3), &[0.5, 0.6], None)
            .unwrap_err();
        assert!(matches!(err, Error::WeightSumError { .. }));
    }

    #[test]
    fn erasure_of_equal_norm_states() {
        let p = branchy();
        let mut forge = ActForge::new(&p);
        let a = StateVector::basis(6, 3);
        let b = StateVector::from_real(&[0.0, 0.6, 0.8, 0.0, 0.0, 0.0]);
        let (u1, u2) = forge.erasure_pair(&a, &b).unwrap();
        assert!(u1.apply(&a).unwrap().distance(&u2.apply(&b).unwrap()) < 1e-12);
        let gap = forge.erasure_pair(&a, &b.scaled(C64::new(0.9, 0.0))).unwrap_err();
        assert!(matches!(gap, Error::NormMismatch { .. }));
    }

    #[test]
    fn reward_act_moves_into_reward() {
        let p = min2();
        let mut forge = ActForge::new(&p);
        let u = forge.reward_act(0, 1).unwrap();
        assert_eq!(smallest_event(&p, &u), Event::single(1));
        assert!(forge.reward_act(0, 1).is_err());
    }

    #[test]
    fn standard_act_weight() {
        let p = branchy();
        let mut forge = ActForge::new(&p);
        let psi = StateVector::basis(6, 0);
        let u = forge.standard_act(&psi, 0.37).unwrap();
        let w = reward_weights(&p, &u.apply(&psi).unwrap()).unwrap();
        assert!((w[1] - 0.37).abs() < 1e-12);
    }

    #[test]
    fn compat_retargets_collisions() {
        let p = branchy();
        let a = ActForge::new(&p).reward_act(0, 1).unwrap();
        let b = identity_act(&p.macrostates[1].subspace).unwrap();
        let c = compat_combine(&p, &[b.clone(), a.clone()], CompatMode::Macrostate).unwrap();
        let first = c.act.restrict(a.domain()).unwrap();
        let expected = PartialIsometryAct::new(a.domain().clone(), &c.retargets[1] * a.matrix()).unwrap();
        assert_eq!(smallest_event(&p, &first), Event::single(2));
        assert!(first.approx_eq(&expected));
        assert!(c.act.restrict(b.domain()).unwrap().approx_eq(&b));
    }
}
