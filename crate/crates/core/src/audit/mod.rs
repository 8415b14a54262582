//! Sampled and exhaustive audits of the richness axioms, the rationality
//! axioms and the lemmas of the representation proof, with replayable
//! witnesses for every failure.

mod catalog;
mod counterexample;
mod lemmas;
mod rationality;
mod richness;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{PartialIsometryAct, StateVector, C64, EPS_ORTH};
use crate::preference::PreferenceOracle;
use crate::problem::{Event, QuantumDecisionProblem};

pub use catalog::{domain_event, event_catalog, macrostate_catalog, CatalogEntry};
pub use counterexample::{audited_names, find_counterexample, CounterexampleTarget, Relaxation};
pub use lemmas::{check_lemmas, ELICIT_TOL};
pub use rationality::audit_rationality;
pub use richness::audit_richness;

/// Perturbation radii for the sampled continuity audits.
pub const RADII: [f64; 3] = [1e-6, 1e-4, 1e-2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Skipped => "skipped",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub label: String,
    pub components: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActRecord {
    pub label: String,
    /// Macrostate ids whose join is the act's domain.
    pub domain: Vec<String>,
    /// The `d × d` operator, row-major.
    pub operator: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub state: String,
    pub left: String,
    pub right: String,
    /// One of `">"`, `"~"`, `"<"`.
    pub observed: String,
    /// What the audited statement demands, in the same notation.
    pub required: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub note: String,
    pub states: Vec<StateRecord>,
    pub acts: Vec<ActRecord>,
    pub comparisons: Vec<ComparisonRecord>,
    pub margins: BTreeMap<String, f64>,
}

pub fn ordering_symbol(o: Ordering) -> &'static str {
    match o {
        Ordering::Greater => ">",
        Ordering::Equal => "~",
        Ordering::Less => "<",
    }
}

pub(crate) fn parse_ordering(s: &str) -> Result<Ordering> {
    match s {
        ">" => Ok(Ordering::Greater),
        "~" => Ok(Ordering::Equal),
        "<" => Ok(Ordering::Less),
        other => Err(Error::InvalidArgument(format!("unknown comparison symbol `{other}`"))),
    }
}

fn encode_state(v: &StateVector) -> Vec<[f64; 2]> {
    v.components().iter().map(|z| [z.re, z.im]).collect()
}

pub(crate) struct WitnessBuilder<'p> {
    p: &'p QuantumDecisionProblem,
    w: Witness,
}

impl<'p> WitnessBuilder<'p> {
    pub fn new(p: &'p QuantumDecisionProblem, note: impl Into<String>) -> Self {
        Self {
            p,
            w: Witness {
                note: note.into(),
                ..Witness::default()
            },
        }
    }

    pub fn state(mut self, label: &str, v: &StateVector) -> Self {
        self.w.states.push(StateRecord {
            label: label.to_string(),
            components: encode_state(v),
        });
        self
    }

    pub fn act(mut self, label: &str, u: &PartialIsometryAct) -> Self {
        let domain = domain_event(self.p, u)
            .map(|e| e.members().map(|m| self.p.macrostates[m].id.clone()).collect())
            .unwrap_or_default();
        let op = u.operator();
        let operator = (0..op.nrows())
            .map(|i| (0..op.ncols()).map(|j| [op[(i, j)].re, op[(i, j)].im]).collect())
            .collect();
        self.w.acts.push(ActRecord {
            label: label.to_string(),
            domain,
            operator,
        });
        self
    }

    pub fn compare(mut self, state: &str, left: &str, right: &str, observed: Ordering, required: &str) -> Self {
        self.w.comparisons.push(ComparisonRecord {
            state: state.to_string(),
            left: left.to_string(),
            right: right.to_string(),
            observed: ordering_symbol(observed).to_string(),
            required: required.to_string(),
        });
        self
    }

    pub fn margin(mut self, name: &str, value: f64) -> Self {
        self.w.margins.insert(name.to_string(), value);
        self
    }

    pub fn build(self) -> Witness {
        self.w
    }
}

/// Recomputes every comparison in `w` and reports whether all observed
/// verdicts are reproduced.
pub fn replay(p: &QuantumDecisionProblem, oracle: &dyn PreferenceOracle, w: &Witness) -> Result<bool> {
    let mut states = BTreeMap::new();
    for s in &w.states {
        let v = StateVector::new(s.components.iter().map(|c| C64::new(c[0], c[1])).collect());
        states.insert(s.label.as_str(), v);
    }
    let mut acts = BTreeMap::new();
    for a in &w.acts {
        let members = a
            .domain
            .iter()
            .map(|id| p.macrostate_index(id))
            .collect::<Result<Vec<_>>>()?;
        let domain = p.event_subspace(Event::from_members(members));
        let d = a.operator.len();
        let op = DMatrix::from_fn(d, d, |i, j| C64::new(a.operator[i][j][0], a.operator[i][j][1]));
        acts.insert(a.label.as_str(), PartialIsometryAct::from_operator(domain, &op)?);
    }
    let lookup_err = |what: &str| Error::UnknownId(what.to_string());
    for c in &w.comparisons {
        let psi = states.get(c.state.as_str()).ok_or_else(|| lookup_err(&c.state))?;
        let left = acts.get(c.left.as_str()).ok_or_else(|| lookup_err(&c.left))?;
        let right = acts.get(c.right.as_str()).ok_or_else(|| lookup_err(&c.right))?;
        if oracle.compare(p, psi, left, right)? != parse_ordering(&c.observed)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomResult {
    pub axiom: String,
    pub status: Status,
    pub checks: usize,
    pub skipped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub suite: String,
    pub oracle: Option<String>,
    pub seed: u64,
    pub samples: usize,
    pub radii: Vec<f64>,
    pub results: Vec<AxiomResult>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.status != Status::Fail)
    }

    pub fn result(&self, axiom: &str) -> Option<&AxiomResult> {
        self.results.iter().find(|r| r.axiom == axiom)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AxiomResult> {
        self.results.iter().filter(|r| r.status == Status::Fail)
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} audit (seed {}, samples {}", self.suite, self.seed, self.samples)?;
        if let Some(o) = &self.oracle {
            write!(f, ", oracle {o}")?;
        }
        writeln!(f, ")")?;
        for r in &self.results {
            write!(f, "  {:<14} {:<8} {} checks", r.axiom, r.status.to_string(), r.checks)?;
            if r.skipped > 0 {
                write!(f, ", {} skipped", r.skipped)?;
            }
            writeln!(f)?;
            if let Some(reason) = &r.reason {
                writeln!(f, "      reason: {reason}")?;
            }
            if let Some(w) = &r.witness {
                writeln!(f, "      witness: {}", w.note)?;
                for c in &w.comparisons {
                    writeln!(
                        f,
                        "        at {}: {} {} {} (required {})",
                        c.state, c.left, c.observed, c.right, c.required
                    )?;
                }
                for (k, v) in &w.margins {
                    writeln!(f, "        {k} = {v:.6e}")?;
                }
            }
        }
        write!(f, "overall: {}", if self.passed() { "pass" } else { "FAIL" })
    }
}

/// Running tally for one axiom.
pub(crate) struct Tally {
    axiom: &'static str,
    checks: usize,
    skipped: usize,
    reason: Option<String>,
    witness: Option<Witness>,
    /// Whether any skipped instance makes the whole axiom unverifiable
    /// (existence statements) rather than just thinning the sample.
    strict: bool,
}

impl Tally {
    pub fn new(axiom: &'static str) -> Self {
        Self {
            axiom,
            checks: 0,
            skipped: 0,
            reason: None,
            witness: None,
            strict: false,
        }
    }

    pub fn existence(axiom: &'static str) -> Self {
        Self {
            strict: true,
            ..Self::new(axiom)
        }
    }

    pub fn pass(&mut self) {
        self.checks += 1;
    }

    pub fn fail(&mut self, w: Witness) {
        self.checks += 1;
        if self.witness.is_none() {
            self.witness = Some(w);
        }
    }

    /// Records a check and fails it with the witness when `ok` is false.
    pub fn expect(&mut self, ok: bool, w: impl FnOnce() -> Witness) {
        if ok {
            self.pass();
        } else {
            self.fail(w());
        }
    }

    pub fn skip(&mut self, reason: impl Into<String>) {
        self.skipped += 1;
        if self.reason.is_none() {
            self.reason = Some(reason.into());
        }
    }

    pub fn finish(self) -> AxiomResult {
        let status = if self.witness.is_some() {
            Status::Fail
        } else if self.checks == 0 || (self.strict && self.skipped > 0) {
            Status::Skipped
        } else {
            Status::Pass
        };
        let reason = match status {
            Status::Skipped => Some(self.reason.unwrap_or_else(|| "no applicable instances".into())),
            _ => self.reason,
        };
        AxiomResult {
            axiom: self.axiom.to_string(),
            status,
            checks: self.checks,
            skipped: self.skipped,
            reason,
            witness: self.witness,
        }
    }
}

/// Distinguishes dimension shortfalls (which skip a sample) from real errors.
pub(crate) fn skippable(e: &Error) -> bool {
    matches!(
        e,
        Error::InsufficientDimension(_) | Error::CannotOrthogonalize(_) | Error::CatalogTooLarge { .. }
    )
}

pub(crate) fn max_entry(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn isometric(u: &PartialIsometryAct) -> bool {
    u.isometry_defect() <= EPS_ORTH
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preference::{BornOracle, CountingOracle, UtilityTable};
    use crate::problem::tests::{coordinate_macrostate, min2, reward};

    fn three_reward() -> (QuantumDecisionProblem, UtilityTable) {
        let p = QuantumDecisionProblem::new(
            8,
            vec![
                coordinate_macrostate(8, "A", &[0, 1, 2]),
                coordinate_macrostate(8, "B1", &[3]),
                coordinate_macrostate(8, "B2", &[4]),
                coordinate_macrostate(8, "C", &[5, 6, 7]),
            ],
            vec![
                reward("r0", &[0], true, false),
                reward("r", &[1, 2], false, false),
                reward("r1", &[3], false, true),
            ],
        );
        let u = UtilityTable::from_pairs([("r0", 0.0), ("r", 0.4), ("r1", 1.0)]);
        (p, u)
    }

    #[test]
    fn born_oracle_passes_everything() {
        for (p, u) in [
            three_reward(),
            (min2(), UtilityTable::from_pairs([("r0", 0.0), ("r1", 1.0)])),
        ] {
            let born = BornOracle::new(u.clone());
            let reports = [
                audit_richness(&p, 50, 3),
                audit_rationality(&p, &born, 50, 3),
                check_lemmas(&p, &born, &u, 50, 3),
            ];
            for r in &reports {
                println!("{r}");
                assert!(r.passed(), "{r}");
            }
        }
    }

    #[test]
    fn counting_oracle_fails_branching_indifference() {
        let (p, u) = three_reward();
        let counting = CountingOracle::new(u);
        let report = audit_rationality(&p, &counting, 50, 5);
        let br = report.result("BrIndif").unwrap();
        assert_eq!(br.status, Status::Fail);
        assert!(replay(&p, &counting, br.witness.as_ref().unwrap()).unwrap());
        assert_eq!(report.result("Ord").unwrap().status, Status::Pass);
    }
}
