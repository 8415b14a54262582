//! Quantum decision problems: macrostates, rewards, the event lattice they
//! generate, and the state-level queries built on them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{PartialIsometryAct, StateVector, Subspace, C64, EPS_NORM, EPS_ORTH, EPS_RANK};

/// Largest macrostate count for which the event lattice is enumerated.
pub const MAX_LATTICE_MACROSTATES: usize = 16;

#[derive(Clone, Debug)]
pub struct Macrostate {
    pub id: String,
    pub subspace: Subspace,
}

#[derive(Clone, Debug)]
pub struct Reward {
    pub id: String,
    /// Indices into the problem's macrostate list.
    pub members: Vec<usize>,
    pub erasure: usize,
    pub is_r0: bool,
    pub is_r1: bool,
}

#[derive(Clone, Debug)]
pub struct NamedAct {
    pub id: String,
    pub act: PartialIsometryAct,
}

/// A lattice event, encoded as the set of macrostates whose join it is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Event(pub u32);

impl Event {
    pub const EMPTY: Event = Event(0);

    pub fn single(index: usize) -> Self {
        Event(1 << index)
    }

    pub fn from_members(indices: impl IntoIterator<Item = usize>) -> Self {
        Event(indices.into_iter().fold(0, |m, i| m | (1 << i)))
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |i| self.0 & (1 << i) != 0)
    }

    pub fn contains(self, index: usize) -> bool {
        self.0 & (1 << index) != 0
    }

    pub fn is_subevent_of(self, other: Event) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Event) -> bool {
        self.0 & other.0 == 0
    }

    pub fn join(self, other: Event) -> Event {
        Event(self.0 | other.0)
    }

    pub fn meet(self, other: Event) -> Event {
        Event(self.0 & other.0)
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    BadDimension(String),
    EmptyMacrostate(String),
    MacrostateDimension {
        macrostate: String,
        found: usize,
    },
    DuplicateId(String),
    NonOrthogonal {
        left: String,
        right: String,
        overlap: f64,
    },
    Uncovered {
        missing: usize,
    },
    EmptyReward(String),
    SharedMacrostate {
        macrostate: String,
        first: String,
        second: String,
    },
    UnassignedMacrostate(String),
    ErasureNotMember {
        reward: String,
        erasure: String,
    },
    ExtremalCount {
        flag: &'static str,
        count: usize,
    },
    ExtremalOverlap(String),
    OrthMacrDisabled,
    ActDimension {
        act: String,
        found: usize,
    },
    Recoherent {
        act: String,
        left: String,
        right: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadDimension(msg) => write!(f, "dimension: {msg}"),
            Violation::EmptyMacrostate(id) => write!(f, "macrostate `{id}` is the zero subspace"),
            Violation::MacrostateDimension { macrostate, found } => {
                write!(f, "macrostate `{macrostate}` lives in dimension {found}")
            }
            Violation::DuplicateId(id) => write!(f, "identifier `{id}` is used twice"),
            Violation::NonOrthogonal { left, right, overlap } => write!(
                f,
                "OrthMacr: macrostates `{left}` and `{right}` overlap ({overlap:.3e})"
            ),
            Violation::Uncovered { missing } => {
                write!(f, "coverage: macrostates leave {missing} dimension(s) uncovered")
            }
            Violation::EmptyReward(id) => write!(f, "reward `{id}` has no member macrostates"),
            Violation::SharedMacrostate {
                macrostate,
                first,
                second,
            } => write!(f, "macrostate `{macrostate}` belongs to both `{first}` and `{second}`"),
            Violation::UnassignedMacrostate(id) => {
                write!(f, "macrostate `{id}` belongs to no reward")
            }
            Violation::ErasureNotMember { reward, erasure } => {
                write!(f, "erasure macrostate `{erasure}` is not a member of reward `{reward}`")
            }
            Violation::ExtremalCount { flag, count } => {
                write!(f, "expected exactly one {flag} reward, found {count}")
            }
            Violation::ExtremalOverlap(id) => write!(f, "reward `{id}` is flagged both r0 and r1"),
            Violation::OrthMacrDisabled => write!(f, "OrthMacr must be enabled"),
            Violation::ActDimension { act, found } => {
                write!(f, "act `{act}` acts on dimension {found}")
            }
            Violation::Recoherent { act, left, right } => write!(
                f,
                "Irrev: act `{act}` sends `{left}` and `{right}` into overlapping events"
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

#[derive(Clone, Debug)]
pub struct QuantumDecisionProblem {
    pub dim: usize,
    pub macrostates: Vec<Macrostate>,
    pub rewards: Vec<Reward>,
    pub orthmacr: bool,
    pub act_generators: Vec<NamedAct>,
    pub event_closure_depth: usize,
}

impl QuantumDecisionProblem {
    pub fn new(dim: usize, macrostates: Vec<Macrostate>, rewards: Vec<Reward>) -> Self {
        Self {
            dim,
            macrostates,
            rewards,
            orthmacr: true,
            act_generators: Vec::new(),
            event_closure_depth: 2,
        }
    }

    pub fn with_acts(mut self, acts: Vec<NamedAct>) -> Self {
        self.act_generators = acts;
        self
    }

    /// Runs [`validate_problem`] and turns a non-empty report into an error.
    pub fn validated(self) -> Result<Self> {
        let report = validate_problem(&self);
        if report.is_valid() {
            Ok(self)
        } else {
            Err(Error::InvalidProblem(report))
        }
    }

    pub fn macrostate_index(&self, id: &str) -> Result<usize> {
        self.macrostates
            .iter()
            .position(|m| m.id == id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn reward_index(&self, id: &str) -> Result<usize> {
        self.rewards
            .iter()
            .position(|r| r.id == id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn r0(&self) -> usize {
        self.rewards
            .iter()
            .position(|r| r.is_r0)
            .expect("problem has an r0 reward")
    }

    pub fn r1(&self) -> usize {
        self.rewards
            .iter()
            .position(|r| r.is_r1)
            .expect("problem has an r1 reward")
    }

    /// The reward whose members include macrostate `m`.
    pub fn reward_of(&self, m: usize) -> usize {
        self.rewards
            .iter()
            .position(|r| r.members.contains(&m))
            .expect("every macrostate belongs to a reward")
    }

    pub fn reward_event(&self, r: usize) -> Event {
        Event::from_members(self.rewards[r].members.iter().copied())
    }

    pub fn full_event(&self) -> Event {
        Event((1u64 << self.macrostates.len()).wrapping_sub(1) as u32)
    }

    pub fn event_subspace(&self, event: Event) -> Subspace {
        let cols: Vec<_> = event
            .members()
            .flat_map(|m| {
                self.macrostates[m]
                    .subspace
                    .basis()
                    .column_iter()
                    .map(|c| c.into_owned())
                    .collect::<Vec<_>>()
            })
            .collect();
        if cols.is_empty() {
            return Subspace::zero(self.dim);
        }
        Subspace::from_columns(&DMatrix::from_columns(&cols), EPS_RANK)
    }

    pub fn reward_subspace(&self, r: usize) -> Subspace {
        self.event_subspace(self.reward_event(r))
    }

    /// Complement of an event inside the lattice.
    pub fn complement_event(&self, event: Event) -> Event {
        Event(self.full_event().0 & !event.0)
    }

    pub fn macrostate_projector(&self, m: usize) -> DMatrix<C64> {
        self.macrostates[m].subspace.projector()
    }

    /// Index of the macrostate that contains `psi`, if any.
    pub fn macrostate_containing(&self, psi: &StateVector) -> Option<usize> {
        if psi.norm() <= EPS_NORM {
            return None;
        }
        self.macrostates.iter().position(|m| m.subspace.contains(psi))
    }

    /// The smallest event containing `psi`.
    pub fn support_event(&self, psi: &StateVector) -> Event {
        let scale = psi.norm().max(1.0);
        Event::from_members((0..self.macrostates.len()).filter(|&m| {
            self.macrostates[m]
                .subspace
                .project(psi)
                .map(|b| b.norm() > EPS_ORTH * scale)
                .unwrap_or(false)
        }))
    }
}

pub fn validate_problem(p: &QuantumDecisionProblem) -> ValidationReport {
    let mut v = Vec::new();
    if p.dim == 0 {
        v.push(Violation::BadDimension("dimension must be positive".into()));
    }
    if !p.orthmacr {
        v.push(Violation::OrthMacrDisabled);
    }
    if p.macrostates.len() > 32 {
        v.push(Violation::BadDimension(format!(
            "{} macrostates exceed the supported 32",
            p.macrostates.len()
        )));
        return ValidationReport { violations: v };
    }
    let mut ids = BTreeSet::new();
    for id in p
        .macrostates
        .iter()
        .map(|m| &m.id)
        .chain(p.rewards.iter().map(|r| &r.id))
    {
        if !ids.insert(id.clone()) {
            v.push(Violation::DuplicateId(id.clone()));
        }
    }
    let mut dims_ok = true;
    for m in &p.macrostates {
        if m.subspace.ambient_dim() != p.dim {
            v.push(Violation::MacrostateDimension {
                macrostate: m.id.clone(),
                found: m.subspace.ambient_dim(),
            });
            dims_ok = false;
        } else if m.subspace.is_zero() {
            v.push(Violation::EmptyMacrostate(m.id.clone()));
        }
    }
    if dims_ok {
        for i in 0..p.macrostates.len() {
            for j in i + 1..p.macrostates.len() {
                let overlap = p.macrostates[i].subspace.overlap(&p.macrostates[j].subspace);
                if overlap > EPS_ORTH {
                    v.push(Violation::NonOrthogonal {
                        left: p.macrostates[i].id.clone(),
                        right: p.macrostates[j].id.clone(),
                        overlap,
                    });
                }
            }
        }
        let covered = if p.macrostates.is_empty() {
            0
        } else {
            p.event_subspace(p.full_event()).dim()
        };
        if covered < p.dim {
            v.push(Violation::Uncovered {
                missing: p.dim - covered,
            });
        }
    }
    let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
    for (ri, r) in p.rewards.iter().enumerate() {
        if r.members.is_empty() {
            v.push(Violation::EmptyReward(r.id.clone()));
        }
        for &m in &r.members {
            if m >= p.macrostates.len() {
                v.push(Violation::BadDimension(format!(
                    "reward `{}` references macrostate index {m}",
                    r.id
                )));
                continue;
            }
            if let Some(&prev) = owner.get(&m) {
                if prev != ri {
                    v.push(Violation::SharedMacrostate {
                        macrostate: p.macrostates[m].id.clone(),
                        first: p.rewards[prev].id.clone(),
                        second: r.id.clone(),
                    });
                }
            } else {
                owner.insert(m, ri);
            }
        }
        if !r.members.contains(&r.erasure) {
            let erasure = p
                .macrostates
                .get(r.erasure)
                .map(|m| m.id.clone())
                .unwrap_or_else(|| format!("#{}", r.erasure));
            v.push(Violation::ErasureNotMember {
                reward: r.id.clone(),
                erasure,
            });
        }
        if r.is_r0 && r.is_r1 {
            v.push(Violation::ExtremalOverlap(r.id.clone()));
        }
    }
    for (i, m) in p.macrostates.iter().enumerate() {
        if !owner.contains_key(&i) {
            v.push(Violation::UnassignedMacrostate(m.id.clone()));
        }
    }
    let r0 = p.rewards.iter().filter(|r| r.is_r0).count();
    let r1 = p.rewards.iter().filter(|r| r.is_r1).count();
    if r0 != 1 {
        v.push(Violation::ExtremalCount { flag: "r0", count: r0 });
    }
    if r1 != 1 {
        v.push(Violation::ExtremalCount { flag: "r1", count: r1 });
    }
    for a in &p.act_generators {
        if a.act.ambient_dim() != p.dim {
            v.push(Violation::ActDimension {
                act: a.id.clone(),
                found: a.act.ambient_dim(),
            });
        } else if dims_ok {
            v.extend(recoherent_pairs(p, a));
        }
    }
    ValidationReport { violations: v }
}

/// Macrostate pairs in a declared act's domain whose images reach
/// overlapping events.
fn recoherent_pairs(p: &QuantumDecisionProblem, a: &NamedAct) -> Vec<Violation> {
    let inside: Vec<(usize, Event)> = (0..p.macrostates.len())
        .filter(|&m| p.macrostates[m].subspace.is_subspace_of(a.act.domain()))
        .filter_map(|m| {
            let r = a.act.restrict(&p.macrostates[m].subspace).ok()?;
            Some((m, smallest_event(p, &r)))
        })
        .collect();
    let mut out = Vec::new();
    for (i, &(m, e)) in inside.iter().enumerate() {
        for &(n, f) in &inside[i + 1..] {
            if !e.is_disjoint(f) {
                out.push(Violation::Recoherent {
                    act: a.id.clone(),
                    left: p.macrostates[m].id.clone(),
                    right: p.macrostates[n].id.clone(),
                });
            }
        }
    }
    out
}

/// All joins of subsets of macrostates, indexed by their member masks.
pub fn event_lattice(p: &QuantumDecisionProblem) -> Result<Vec<(Event, Subspace)>> {
    let n = p.macrostates.len();
    if n > MAX_LATTICE_MACROSTATES {
        return Err(Error::TooManyMacrostates {
            count: n,
            max: MAX_LATTICE_MACROSTATES,
        });
    }
    Ok((0..1u32 << n)
        .map(|mask| (Event(mask), p.event_subspace(Event(mask))))
        .collect())
}

/// Nonzero projections of `psi` onto the macrostates, in declaration order.
pub fn branch_decomposition(p: &QuantumDecisionProblem, psi: &StateVector) -> Result<Vec<(usize, StateVector)>> {
    let mut out = Vec::new();
    for (i, m) in p.macrostates.iter().enumerate() {
        let branch = m.subspace.project(psi)?;
        if branch.norm() > EPS_ORTH {
            out.push((i, branch));
        }
    }
    Ok(out)
}

/// Normalized squared reward-projection norms, indexed like `p.rewards`.
pub fn reward_weights(p: &QuantumDecisionProblem, psi: &StateVector) -> Result<Vec<f64>> {
    let total = psi.norm_sqr();
    if total.sqrt() <= EPS_NORM {
        return Err(Error::ZeroState);
    }
    p.rewards
        .iter()
        .map(|r| {
            let mut w = 0.0;
            for &m in &r.members {
                w += p.macrostates[m].subspace.project(psi)?.norm_sqr();
            }
            Ok(w / total)
        })
        .collect()
}

pub fn born_weights(p: &QuantumDecisionProblem, psi: &StateVector) -> Result<BTreeMap<String, f64>> {
    let w = reward_weights(p, psi)?;
    Ok(p.rewards.iter().map(|r| r.id.clone()).zip(w).collect())
}

/// The smallest lattice event containing the range of `u`.
pub fn smallest_event(p: &QuantumDecisionProblem, u: &PartialIsometryAct) -> Event {
    let range = u.range_vectors();
    Event::from_members((0..p.macrostates.len()).filter(|&m| {
        let s = &p.macrostates[m].subspace;
        range
            .iter()
            .any(|v| s.project(v).map(|b| b.norm() > EPS_ORTH).unwrap_or(false))
    }))
}

pub fn smallest_event_subspace(p: &QuantumDecisionProblem, u: &PartialIsometryAct) -> Subspace {
    p.event_subspace(smallest_event(p, u))
}

/// A state reached from `source` (inside macrostate `origin`) by `witness_act`.
#[derive(Clone, Debug)]
pub struct AccessibleState {
    pub state: StateVector,
    pub source: StateVector,
    pub origin: usize,
    pub witness_act: PartialIsometryAct,
}

impl AccessibleState {
    pub fn new(p: &QuantumDecisionProblem, source: StateVector, witness_act: PartialIsometryAct) -> Result<Self> {
        let origin = p
            .macrostate_containing(&source)
            .ok_or_else(|| Error::DomainMismatch("source state is not inside a single macrostate".into()))?;
        if !p.macrostates[origin].subspace.is_subspace_of(witness_act.domain()) {
            return Err(Error::DomainMismatch(
                "witness act is not available at the source macrostate".into(),
            ));
        }
        let state = witness_act.apply(&source)?;
        Ok(Self {
            state,
            source,
            origin,
            witness_act,
        })
    }

    /// The trivial witness: a state already inside a macrostate.
    pub fn at_rest(p: &QuantumDecisionProblem, source: StateVector) -> Result<Self> {
        let origin = p
            .macrostate_containing(&source)
            .ok_or_else(|| Error::DomainMismatch("state is not inside a single macrostate".into()))?;
        let witness_act = PartialIsometryAct::identity(p.macrostates[origin].subspace.clone());
        Ok(Self {
            state: source.clone(),
            source,
            origin,
            witness_act,
        })
    }
}
