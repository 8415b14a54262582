//! JSON instance documents: decision problem, utility table and oracle.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::audit::{ordering_symbol, parse_ordering, Relaxation};
use crate::hilbert::{orthonormalize, PartialIsometryAct, StateVector, C64, EPS_RANK};
use crate::preference::{BornOracle, CountingOracle, PreferenceOracle, PreferenceOverride, TableOracle, UtilityTable};
use crate::problem::{
    validate_problem, Macrostate, NamedAct, QuantumDecisionProblem, Reward, ValidationReport, Violation,
};

pub const SCHEMA_VERSION: u32 = 1;

/// A complex number written as `[re, im]`.
pub type Pair = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub schema_version: u32,
    pub dim: usize,
    pub macrostates: Vec<MacrostateDoc>,
    pub rewards: Vec<RewardDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub acts: Vec<ActDoc>,
    pub utility: BTreeMap<String, f64>,
    pub oracle: OracleKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preference_table: Vec<TableEntryDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacrostateDoc {
    pub id: String,
    pub basis: Vec<Vec<Pair>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardDoc {
    pub id: String,
    pub members: Vec<String>,
    pub erasure: String,
    pub r0: bool,
    pub r1: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActDoc {
    pub id: String,
    pub domain: Vec<String>,
    /// Full `dim × dim` operator, row-major; only its action on the domain
    /// matters.
    pub matrix: Vec<Vec<Pair>>,
}

/// An explicit verdict for the table oracle: `left order right` with
/// `order` one of `>`, `~`, `<`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntryDoc {
    pub left: String,
    pub right: String,
    pub order: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Born,
    Counting,
    Table,
}

impl std::str::FromStr for OracleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "born" => Ok(OracleKind::Born),
            "counting" => Ok(OracleKind::Counting),
            "table" => Ok(OracleKind::Table),
            other => Err(format!("unknown oracle `{other}` (expected born, counting or table)")),
        }
    }
}

#[derive(Debug)]
pub enum LoadError {
    Io { path: String, message: String },
    Parse { path: String, message: String },
    Schema { path: String, message: String },
    Validation { path: String, report: ValidationReport },
}

impl LoadError {
    pub fn path(&self) -> &str {
        match self {
            LoadError::Io { path, .. }
            | LoadError::Parse { path, .. }
            | LoadError::Schema { path, .. }
            | LoadError::Validation { path, .. } => path,
        }
    }

    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        LoadError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io { path, message } => write!(f, "IoError at {path}: {message}"),
            LoadError::Parse { path, message } => write!(f, "ParseError at {path}: {message}"),
            LoadError::Schema { path, message } => write!(f, "SchemaError at {path}: {message}"),
            LoadError::Validation { path, report } => write!(f, "ValidationError at {path}: {report}"),
        }
    }
}

impl std::error::Error for LoadError {}

#[derive(Clone, Debug)]
pub struct Instance {
    pub document: InstanceDocument,
    pub problem: QuantumDecisionProblem,
    pub utility: UtilityTable,
    pub oracle_kind: OracleKind,
    pub overrides: Vec<PreferenceOverride>,
}

impl Instance {
    /// The oracle named in the document, or `kind` if given.
    pub fn oracle(&self, kind: Option<OracleKind>) -> Box<dyn PreferenceOracle> {
        let base = BornOracle::new(self.utility.clone());
        match kind.unwrap_or(self.oracle_kind) {
            OracleKind::Born => Box::new(base),
            OracleKind::Counting => Box::new(CountingOracle::new(self.utility.clone())),
            OracleKind::Table => Box::new(TableOracle {
                base,
                overrides: self.overrides.clone(),
            }),
        }
    }
}

pub fn parse_document(text: &str) -> Result<InstanceDocument, LoadError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| LoadError::Parse {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        LoadError::schema(path, e.into_inner().to_string())
    })
}

pub fn load(path: &Path) -> Result<Instance, LoadError> {
    load_relaxed(path, Relaxation::None)
}

/// Loads an instance, tolerating the violations that `relax` lifts.
pub fn load_relaxed(path: &Path, relax: Relaxation) -> Result<Instance, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    from_str_relaxed(&text, relax)
}

pub fn from_str_relaxed(text: &str, relax: Relaxation) -> Result<Instance, LoadError> {
    build(parse_document(text)?, relax)
}

fn complex_matrix(rows: &[Vec<Pair>], nrows: usize, ncols: usize, path: &str) -> Result<DMatrix<C64>, LoadError> {
    if rows.len() != nrows {
        return Err(LoadError::schema(
            path,
            format!("expected {nrows} rows, found {}", rows.len()),
        ));
    }
    let mut m = DMatrix::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(LoadError::schema(
                format!("{path}[{i}]"),
                format!("expected {ncols} entries, found {}", row.len()),
            ));
        }
        for (j, z) in row.iter().enumerate() {
            m[(i, j)] = C64::new(z[0], z[1]);
        }
    }
    Ok(m)
}

fn index_of(ids: &BTreeMap<&str, usize>, id: &str, path: String) -> Result<usize, LoadError> {
    ids.get(id)
        .copied()
        .ok_or_else(|| LoadError::schema(path, format!("unknown macrostate `{id}`")))
}

/// Turns a schema-valid document into a validated instance.
pub fn build(doc: InstanceDocument, relax: Relaxation) -> Result<Instance, LoadError> {
    if doc.schema_version != SCHEMA_VERSION {
        return Err(LoadError::schema(
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", doc.schema_version),
        ));
    }
    if doc.dim == 0 {
        return Err(LoadError::schema("dim", "dimension must be positive"));
    }
    let d = doc.dim;
    let mut macrostates = Vec::new();
    for (i, m) in doc.macrostates.iter().enumerate() {
        let path = format!("macrostates[{i}].basis");
        let mut vs = Vec::new();
        for (j, v) in m.basis.iter().enumerate() {
            if v.len() != d {
                return Err(LoadError::schema(
                    format!("{path}[{j}]"),
                    format!("expected {d} components, found {}", v.len()),
                ));
            }
            vs.push(StateVector::new(v.iter().map(|z| C64::new(z[0], z[1])).collect()));
        }
        let subspace = orthonormalize(&vs, EPS_RANK).map_err(|e| LoadError::schema(&path, e.to_string()))?;
        if subspace.dim() != vs.len() {
            return Err(LoadError::schema(path, "basis vectors are linearly dependent"));
        }
        macrostates.push(Macrostate {
            id: m.id.clone(),
            subspace,
        });
    }
    let ids: BTreeMap<&str, usize> = doc
        .macrostates
        .iter()
        .enumerate()
        .map(|(i, m)| (m.id.as_str(), i))
        .collect();

    let mut rewards = Vec::new();
    for (i, r) in doc.rewards.iter().enumerate() {
        let members = r
            .members
            .iter()
            .enumerate()
            .map(|(j, id)| index_of(&ids, id, format!("rewards[{i}].members[{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        rewards.push(Reward {
            id: r.id.clone(),
            members,
            erasure: index_of(&ids, &r.erasure, format!("rewards[{i}].erasure"))?,
            is_r0: r.r0,
            is_r1: r.r1,
        });
    }

    let mut p = QuantumDecisionProblem::new(d, macrostates, rewards);
    let mut acts = Vec::new();
    for (i, a) in doc.acts.iter().enumerate() {
        let members = a
            .domain
            .iter()
            .enumerate()
            .map(|(j, id)| index_of(&ids, id, format!("acts[{i}].domain[{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let domain = p.event_subspace(crate::problem::Event::from_members(members));
        let op = complex_matrix(&a.matrix, d, d, &format!("acts[{i}].matrix"))?;
        let act = PartialIsometryAct::from_operator(domain, &op)
            .map_err(|e| LoadError::schema(format!("acts[{i}].matrix"), e.to_string()))?;
        acts.push(NamedAct { id: a.id.clone(), act });
    }
    p = p.with_acts(acts);

    let lifted = |v: &Violation| match relax {
        Relaxation::OrthMacr => matches!(v, Violation::NonOrthogonal { .. } | Violation::OrthMacrDisabled),
        Relaxation::Irrev => matches!(v, Violation::Recoherent { .. }),
        Relaxation::None => false,
    };
    if relax == Relaxation::OrthMacr {
        p.orthmacr = false;
    }
    let mut report = validate_problem(&p);
    report.violations.retain(|v| !lifted(v));
    if !report.is_valid() {
        return Err(LoadError::Validation {
            path: violation_path(&report.violations[0]).into(),
            report,
        });
    }

    let utility = UtilityTable::new(doc.utility.clone());
    for (i, r) in doc.rewards.iter().enumerate() {
        if !doc.utility.contains_key(&r.id) {
            return Err(LoadError::schema(
                format!("utility.{}", r.id),
                format!("no utility for reward {i}"),
            ));
        }
    }
    utility
        .check_gauge(&p)
        .map_err(|e| LoadError::schema("utility", e.to_string()))?;

    let mut overrides = Vec::new();
    for (i, t) in doc.preference_table.iter().enumerate() {
        let find = |id: &str, field: &str| {
            p.act_generators
                .iter()
                .find(|a| a.id == id)
                .map(|a| a.act.clone())
                .ok_or_else(|| {
                    LoadError::schema(format!("preference_table[{i}].{field}"), format!("unknown act `{id}`"))
                })
        };
        overrides.push(PreferenceOverride {
            left: find(&t.left, "left")?,
            right: find(&t.right, "right")?,
            order: parse_ordering(&t.order)
                .map_err(|e| LoadError::schema(format!("preference_table[{i}].order"), e.to_string()))?,
        });
    }
    if doc.oracle == OracleKind::Table && overrides.is_empty() {
        return Err(LoadError::schema(
            "preference_table",
            "the table oracle needs at least one entry",
        ));
    }

    Ok(Instance {
        oracle_kind: doc.oracle,
        document: doc,
        problem: p,
        utility,
        overrides,
    })
}

fn violation_path(v: &Violation) -> &'static str {
    match v {
        Violation::BadDimension(_) => "dim",
        Violation::EmptyMacrostate(_)
        | Violation::MacrostateDimension { .. }
        | Violation::NonOrthogonal { .. }
        | Violation::Uncovered { .. }
        | Violation::OrthMacrDisabled => "macrostates",
        Violation::ActDimension { .. } | Violation::Recoherent { .. } => "acts",
        _ => "rewards",
    }
}

pub fn to_json(doc: &InstanceDocument) -> String {
    serde_json::to_string_pretty(doc).expect("documents always serialize")
}

/// `>`, `~` or `<`, as used in preference tables.
pub fn order_symbol(o: Ordering) -> &'static str {
    ordering_symbol(o)
}
