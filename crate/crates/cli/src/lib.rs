//! Command dispatch for the `qdt` binary. Exit codes: 0 when everything
//! checked passes, 1 for an audited failure (a witness is printed), 2 for
//! usage, input and I/O errors.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qdt_core::audit::{
    audit_rationality, audit_richness, check_lemmas, find_counterexample, AuditReport, CounterexampleTarget,
    Relaxation, Witness, ELICIT_TOL,
};
use qdt_core::branching::{deviation_series, grain_series, BranchTree};
use qdt_core::classical::{
    check_vnm_axioms, random_lotteries, savage_probability, uniform_world, vnm_elicit, LexicographicOracle,
    LotteryOracle, PlantedMeasureOracle, PmeuOracle, SavageBracket, VnmReport,
};
use qdt_core::instance::{load_relaxed, Instance, LoadError, OracleKind};
use qdt_core::preference::{elicit_utility_at, probe, UtilityTable};
use qdt_core::sampling::stream_rng;

pub const SEED_ENV: &str = "QDT_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "qdt",
    version,
    about = "Audit decision-theoretic axioms on finite quantum decision problems"
)]
struct Cli {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Sampling {
    /// RNG seed; falls back to $QDT_SEED.
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long, default_value_t = 200)]
    samples: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and validate an instance file.
    Validate { instance: PathBuf },
    /// Sampled checks of the richness axioms.
    AuditRichness {
        instance: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Sampled checks of the rationality axioms against an oracle.
    AuditRationality {
        instance: PathBuf,
        /// Overrides the oracle named in the instance.
        #[arg(long)]
        oracle: Option<OracleKind>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Sampled checks of the derived lemmas.
    CheckLemmas {
        instance: PathBuf,
        #[arg(long)]
        oracle: Option<OracleKind>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Checks the oracle against the expected-utility order.
    BornTheorem {
        instance: PathBuf,
        #[arg(long)]
        oracle: Option<OracleKind>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Random search for a counterexample with a structural requirement lifted.
    Counterexample {
        instance: PathBuf,
        /// orthmacr, irrev or none.
        #[arg(long, default_value = "none")]
        relax: String,
        /// Search for a failure of this axiom or lemma instead.
        #[arg(long)]
        axiom: Option<String>,
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        #[arg(long)]
        oracle: Option<OracleKind>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Squared-amplitude mass of deviating branches, as CSV.
    Simulate {
        #[arg(long)]
        k: usize,
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long)]
        eps: f64,
    },
    /// Branch counts above amplitude thresholds, as CSV.
    SweepGrain {
        #[arg(long)]
        k: usize,
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',')]
        theta_list: Vec<f64>,
    },
    /// Elicit utilities from an oracle by standard-act bisection.
    Elicit {
        instance: PathBuf,
        #[arg(long)]
        oracle: Option<OracleKind>,
        #[arg(long, default_value_t = ELICIT_TOL)]
        tol: f64,
    },
    /// Expected-utility axioms on a random lottery set.
    ClassicalVnm {
        /// Take rewards and utilities from this instance instead of a random table.
        instance: Option<PathBuf>,
        /// pmeu or lexicographic.
        #[arg(long, default_value = "pmeu")]
        order: String,
        /// Number of rewards for the random table.
        #[arg(long, default_value_t = 4)]
        rewards: usize,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Bracket an event's probability with equally likely cells.
    Savage {
        #[arg(long)]
        cells: usize,
        /// State count; must be a multiple of the cell count.
        #[arg(long)]
        states: Option<usize>,
        /// The event is the first this many states.
        #[arg(long)]
        event_size: Option<usize>,
    },
}

/// A failure that ends the command with exit code 2.
struct UsageError(String);

impl From<LoadError> for UsageError {
    fn from(e: LoadError) -> Self {
        UsageError(e.to_string())
    }
}

impl From<qdt_core::Error> for UsageError {
    fn from(e: qdt_core::Error) -> Self {
        UsageError(e.to_string())
    }
}

impl From<std::io::Error> for UsageError {
    fn from(e: std::io::Error) -> Self {
        UsageError(format!("io: {e}"))
    }
}

type CmdResult = Result<i32, UsageError>;

/// Runs one command line; returns the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    match dispatch(&cli, env_seed.as_deref(), out) {
        Ok(code) => code,
        Err(UsageError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

fn resolve_seed(flag: Option<u64>, env: Option<&str>) -> Result<u64, UsageError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        None => Err(UsageError(format!("a seed is required: pass --seed or set {SEED_ENV}"))),
    }
}

fn load(path: &Path) -> Result<Instance, UsageError> {
    Ok(load_relaxed(path, Relaxation::None)?)
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), UsageError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| UsageError(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn emit_report(out: &mut dyn Write, json: bool, report: &AuditReport) -> CmdResult {
    if json {
        emit_json(out, report)?;
    } else {
        writeln!(out, "{report}")?;
    }
    Ok(if report.passed() { 0 } else { 1 })
}

fn dispatch(cli: &Cli, env_seed: Option<&str>, out: &mut dyn Write) -> CmdResult {
    let json = cli.json;
    match &cli.command {
        Command::Validate { instance } => validate(instance, json, out),
        Command::AuditRichness { instance, sampling } => {
            let seed = resolve_seed(sampling.seed, env_seed)?;
            let inst = load(instance)?;
            emit_report(out, json, &audit_richness(&inst.problem, sampling.samples, seed))
        }
        Command::AuditRationality {
            instance,
            oracle,
            sampling,
        } => {
            let seed = resolve_seed(sampling.seed, env_seed)?;
            let inst = load(instance)?;
            let o = inst.oracle(*oracle);
            emit_report(
                out,
                json,
                &audit_rationality(&inst.problem, o.as_ref(), sampling.samples, seed),
            )
        }
        Command::CheckLemmas {
            instance,
            oracle,
            sampling,
        } => {
            let seed = resolve_seed(sampling.seed, env_seed)?;
            let inst = load(instance)?;
            let o = inst.oracle(*oracle);
            let report = check_lemmas(&inst.problem, o.as_ref(), &inst.utility, sampling.samples, seed);
            emit_report(out, json, &report)
        }
        Command::BornTheorem {
            instance,
            oracle,
            sampling,
        } => {
            let seed = resolve_seed(sampling.seed, env_seed)?;
            let inst = load(instance)?;
            let o = inst.oracle(*oracle);
            let mut report = check_lemmas(&inst.problem, o.as_ref(), &inst.utility, sampling.samples, seed);
            report.suite = "born-theorem".into();
            report
                .results
                .retain(|r| r.axiom == "StandardAct" || r.axiom == "BornTheorem");
            emit_report(out, json, &report)
        }
        Command::Counterexample {
            instance,
            relax,
            axiom,
            budget,
            oracle,
            seed,
        } => {
            let seed = resolve_seed(*seed, env_seed)?;
            let relax: Relaxation = relax.parse()?;
            counterexample(instance, relax, axiom.as_deref(), *budget, *oracle, seed, json, out)
        }
        Command::Simulate { k, weights, n, eps } => simulate(*k, weights, n, *eps, json, out),
        Command::SweepGrain {
            k,
            weights,
            n,
            theta_list,
        } => sweep_grain(*k, weights, *n, theta_list, json, out),
        Command::Elicit { instance, oracle, tol } => elicit(instance, *oracle, *tol, json, out),
        Command::ClassicalVnm {
            instance,
            order,
            rewards,
            sampling,
        } => {
            let seed = resolve_seed(sampling.seed, env_seed)?;
            classical_vnm(instance.as_deref(), order, *rewards, sampling.samples, seed, json, out)
        }
        Command::Savage {
            cells,
            states,
            event_size,
        } => savage(*cells, *states, *event_size, json, out),
    }
}

#[derive(Serialize)]
struct ValidationDoc {
    instance: String,
    valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    macrostates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rewards: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    acts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_path: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    violations: Vec<String>,
}

fn validate(path: &Path, json: bool, out: &mut dyn Write) -> CmdResult {
    let name = path.display().to_string();
    match load_relaxed(path, Relaxation::None) {
        Ok(inst) => {
            let p = &inst.problem;
            if json {
                emit_json(
                    out,
                    &ValidationDoc {
                        instance: name,
                        valid: true,
                        dim: Some(p.dim),
                        macrostates: Some(p.macrostates.len()),
                        rewards: Some(p.rewards.len()),
                        acts: Some(p.act_generators.len()),
                        error_path: None,
                        violations: Vec::new(),
                    },
                )?;
            } else {
                writeln!(
                    out,
                    "{name}: valid (dim {}, {} macrostates, {} rewards, {} acts)",
                    p.dim,
                    p.macrostates.len(),
                    p.rewards.len(),
                    p.act_generators.len()
                )?;
            }
            Ok(0)
        }
        Err(LoadError::Validation { path: field, report }) => {
            let violations: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            if json {
                emit_json(
                    out,
                    &ValidationDoc {
                        instance: name,
                        valid: false,
                        dim: None,
                        macrostates: None,
                        rewards: None,
                        acts: None,
                        error_path: Some(field),
                        violations,
                    },
                )?;
            } else {
                writeln!(out, "{name}: ValidationError at {field}")?;
                for v in violations {
                    writeln!(out, "  {v}")?;
                }
            }
            Ok(1)
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct CounterexampleDoc<'a> {
    relax: String,
    target: String,
    budget: usize,
    seed: u64,
    found: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<&'a Witness>,
}

#[allow(clippy::too_many_arguments)]
fn counterexample(
    path: &Path,
    relax: Relaxation,
    axiom: Option<&str>,
    budget: usize,
    oracle: Option<OracleKind>,
    seed: u64,
    json: bool,
    out: &mut dyn Write,
) -> CmdResult {
    let target = match (axiom, relax.default_target()) {
        (Some(name), _) => CounterexampleTarget::Axiom(name.to_string()),
        (None, Some(t)) => t,
        (None, None) => return Err(UsageError("--axiom is required when nothing is relaxed".into())),
    };
    let inst = load_relaxed(path, relax)?;
    let o = inst.oracle(oracle);
    let found = find_counterexample(&inst.problem, o.as_ref(), &target, budget, seed)?;
    let target_name = match &target {
        CounterexampleTarget::BranchUniqueness => "branch-uniqueness".to_string(),
        CounterexampleTarget::IrrevEquivalenceStep => "irrev-equivalence-step".to_string(),
        CounterexampleTarget::Axiom(a) => a.clone(),
    };
    let relax_name = format!("{relax:?}").to_lowercase();
    if json {
        emit_json(
            out,
            &CounterexampleDoc {
                relax: relax_name,
                target: target_name,
                budget,
                seed,
                found: found.is_some(),
                witness: found.as_ref(),
            },
        )?;
    } else {
        writeln!(
            out,
            "counterexample search (relax {relax_name}, target {target_name}, budget {budget}, seed {seed})"
        )?;
        match &found {
            Some(w) => {
                writeln!(out, "  found: {}", w.note)?;
                for s in &w.states {
                    writeln!(out, "    state {} = {}", s.label, format_components(&s.components))?;
                }
                for a in &w.acts {
                    writeln!(out, "    act {} on {}", a.label, a.domain.join("+"))?;
                }
                for c in &w.comparisons {
                    writeln!(
                        out,
                        "    at {}: {} {} {} (required {})",
                        c.state, c.left, c.observed, c.right, c.required
                    )?;
                }
                for (k, v) in &w.margins {
                    writeln!(out, "    {k} = {v:.6e}")?;
                }
            }
            None => writeln!(out, "  none found")?,
        }
    }
    Ok(if found.is_some() { 1 } else { 0 })
}

fn format_components(c: &[[f64; 2]]) -> String {
    let parts: Vec<String> = c.iter().map(|z| format!("{:+.6}{:+.6}i", z[0], z[1])).collect();
    format!("[{}]", parts.join(", "))
}

fn check_weights(k: usize, weights: &[f64]) -> Result<(), UsageError> {
    if weights.len() != k {
        return Err(UsageError(format!("--k {k} but {} weights given", weights.len())));
    }
    Ok(())
}

/// CSV floats: shortest round-trip form, `.` decimal separator.
fn csv_float(x: f64) -> String {
    format!("{x:e}")
}

fn simulate(k: usize, weights: &[f64], ns: &[usize], eps: f64, json: bool, out: &mut dyn Write) -> CmdResult {
    check_weights(k, weights)?;
    if ns.is_empty() {
        return Err(UsageError("--n needs at least one depth".into()));
    }
    let rows = deviation_series(weights, ns, eps)?;
    if json {
        #[derive(Serialize)]
        struct Row {
            n: usize,
            eps: f64,
            squared_amplitude_mass: f64,
        }
        let rows: Vec<Row> = rows
            .iter()
            .map(|r| Row {
                n: r.n,
                eps: r.eps,
                squared_amplitude_mass: r.squared_amplitude_mass,
            })
            .collect();
        emit_json(out, &rows)?;
    } else {
        writeln!(out, "n,eps,squared_amplitude_mass")?;
        for r in rows {
            writeln!(out, "{},{},{}", r.n, r.eps, csv_float(r.squared_amplitude_mass))?;
        }
    }
    Ok(0)
}

fn sweep_grain(k: usize, weights: &[f64], n: usize, thetas: &[f64], json: bool, out: &mut dyn Write) -> CmdResult {
    check_weights(k, weights)?;
    if thetas.is_empty() {
        return Err(UsageError("--theta-list needs at least one threshold".into()));
    }
    let tree = BranchTree::grow(weights, n)?;
    let rows = grain_series(&tree, thetas)?;
    if json {
        // Counts can exceed u64, so they travel as decimal strings.
        let rows: Vec<BTreeMap<&str, String>> = rows
            .iter()
            .map(|r| BTreeMap::from([("theta", r.theta.to_string()), ("count", r.count.to_string())]))
            .collect();
        emit_json(out, &rows)?;
    } else {
        writeln!(out, "theta,count")?;
        for r in rows {
            writeln!(out, "{},{}", r.theta, r.count)?;
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct ElicitDoc {
    oracle: String,
    tol: f64,
    probe: String,
    utility: BTreeMap<String, f64>,
    steps: BTreeMap<String, usize>,
    max_deviation: f64,
}

fn elicit(path: &Path, oracle: Option<OracleKind>, tol: f64, json: bool, out: &mut dyn Write) -> CmdResult {
    let inst = load(path)?;
    let p = &inst.problem;
    let o = inst.oracle(oracle);
    let (m, psi) = probe(p);
    let (u, stats) = match elicit_utility_at(p, o.as_ref(), tol, m, &psi) {
        Ok(x) => x,
        Err(e @ qdt_core::Error::NonMonotoneOracle(_)) => {
            writeln!(out, "elicitation failed: {e}")?;
            return Ok(1);
        }
        Err(e) => return Err(e.into()),
    };
    let values: BTreeMap<String, f64> = p
        .rewards
        .iter()
        .map(|r| (r.id.clone(), u.get(&r.id).unwrap_or(f64::NAN)))
        .collect();
    let max_deviation = p
        .rewards
        .iter()
        .map(|r| (values[&r.id] - inst.utility.get(&r.id).unwrap_or(f64::NAN)).abs())
        .fold(0.0, f64::max);
    let doc = ElicitDoc {
        oracle: o.name().to_string(),
        tol,
        probe: p.macrostates[m].id.clone(),
        utility: values,
        steps: stats.steps,
        max_deviation,
    };
    if json {
        emit_json(out, &doc)?;
    } else {
        writeln!(
            out,
            "elicited utilities (oracle {}, probe in {}, tol {tol:e})",
            doc.oracle, doc.probe
        )?;
        for r in &p.rewards {
            writeln!(
                out,
                "  {:<10} {:.9} ({} steps)",
                r.id, doc.utility[&r.id], doc.steps[&r.id]
            )?;
        }
        writeln!(out, "max deviation from the instance table: {max_deviation:.3e}")?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct VnmDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    elicited: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elicitation_error: Option<f64>,
    report: VnmReport,
}

fn classical_vnm(
    path: Option<&Path>,
    order: &str,
    rewards: usize,
    samples: usize,
    seed: u64,
    json: bool,
    out: &mut dyn Write,
) -> CmdResult {
    let mut rng = stream_rng(seed, 40);
    let (ids, planted, r0, r1) = match path {
        Some(path) => {
            let inst = load(path)?;
            let p = &inst.problem;
            let ids: Vec<String> = p.rewards.iter().map(|r| r.id.clone()).collect();
            (
                ids,
                inst.utility.clone(),
                p.rewards[p.r0()].id.clone(),
                p.rewards[p.r1()].id.clone(),
            )
        }
        None => {
            if rewards < 2 {
                return Err(UsageError("--rewards must be at least 2".into()));
            }
            let ids: Vec<String> = (0..rewards).map(|i| format!("x{i}")).collect();
            let mut values = BTreeMap::new();
            for (i, id) in ids.iter().enumerate() {
                let v = if i == 0 {
                    0.0
                } else if i == rewards - 1 {
                    1.0
                } else {
                    rand::Rng::random::<f64>(&mut rng)
                };
                values.insert(id.clone(), v);
            }
            let (r0, r1) = (ids[0].clone(), ids[rewards - 1].clone());
            (ids, UtilityTable::new(values), r0, r1)
        }
    };
    let oracle: Box<dyn LotteryOracle> = match order {
        "pmeu" => Box::new(PmeuOracle {
            utility: planted.clone(),
        }),
        "lexicographic" => {
            // Best reward first, then the rest by descending utility.
            let mut keys = ids.clone();
            keys.sort_by(|a, b| {
                let (ua, ub) = (planted.get(a).unwrap_or(0.0), planted.get(b).unwrap_or(0.0));
                ub.total_cmp(&ua).then(a.cmp(b))
            });
            Box::new(LexicographicOracle { keys })
        }
        other => {
            return Err(UsageError(format!(
                "unknown order `{other}` (expected pmeu or lexicographic)"
            )))
        }
    };
    let lotteries = random_lotteries(&mut rng, &ids, samples.clamp(2, 40));
    let report = check_vnm_axioms(oracle.as_ref(), &lotteries, samples, seed)?;
    let (elicited, elicitation_error) = match vnm_elicit(oracle.as_ref(), &ids, &r0, &r1, ELICIT_TOL) {
        Ok(u) => {
            let values: BTreeMap<String, f64> = ids.iter().map(|r| (r.clone(), u.get(r).unwrap_or(f64::NAN))).collect();
            let err = ids
                .iter()
                .map(|r| (values[r] - planted.get(r).unwrap_or(f64::NAN)).abs())
                .fold(0.0, f64::max);
            (Some(values), Some(err))
        }
        Err(_) => (None, None),
    };
    let passed = report.passed();
    if json {
        emit_json(
            out,
            &VnmDoc {
                elicited,
                elicitation_error,
                report,
            },
        )?;
    } else {
        writeln!(out, "{report}")?;
        match (elicited, elicitation_error) {
            (Some(values), Some(err)) => {
                writeln!(out, "standard-gamble utilities (max error {err:.3e}):")?;
                for (r, v) in values {
                    writeln!(out, "  {r:<10} {v:.9}")?;
                }
            }
            _ => writeln!(out, "standard-gamble utilities: not elicitable")?,
        }
    }
    Ok(if passed { 0 } else { 1 })
}

#[derive(Serialize)]
struct SavageDoc {
    states: usize,
    event_size: usize,
    planted_probability: f64,
    bracket: SavageBracket,
    contains_planted: bool,
}

fn savage(
    cells: usize,
    states: Option<usize>,
    event_size: Option<usize>,
    json: bool,
    out: &mut dyn Write,
) -> CmdResult {
    if cells == 0 {
        return Err(UsageError("--cells must be positive".into()));
    }
    let count = states.unwrap_or(8 * cells);
    let (ids, partition, measure) = uniform_world(count, cells)?;
    let size = event_size.unwrap_or(count * 3 / 10);
    if size > count {
        return Err(UsageError(format!("--event-size {size} exceeds the {count} states")));
    }
    let event: BTreeSet<String> = ids[..size].iter().cloned().collect();
    let oracle = PlantedMeasureOracle {
        measure,
        utility: BTreeMap::from([("x".to_string(), 1.0), ("y".to_string(), 0.0)]),
    };
    let planted = oracle.probability(&event);
    let bracket = savage_probability(&oracle, &ids, &event, &partition, "x", "y")?;
    let contains = bracket.lower - 1e-12 <= planted && planted <= bracket.upper + 1e-12;
    if json {
        emit_json(
            out,
            &SavageDoc {
                states: count,
                event_size: size,
                planted_probability: planted,
                bracket,
                contains_planted: contains,
            },
        )?;
    } else {
        writeln!(
            out,
            "event of {size}/{count} states, planted probability {planted}: {} of {} cells needed, bracket [{}, {}]",
            bracket.cells_needed, bracket.cells, bracket.lower, bracket.upper
        )?;
    }
    Ok(if contains { 0 } else { 1 })
}
