//! Classical decision theory: lotteries under risk, the expected-utility
//! order and its axioms, and event-likelihood bracketing under uncertainty.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audit::Status;
use crate::error::{Error, Result};
use crate::preference::{banded, UtilityTable, EPS_EU};
use crate::sampling::stream_rng;

const PROB_TOL: f64 = 1e-12;

/// A finite probability distribution over reward ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lottery {
    probs: BTreeMap<String, f64>,
}

impl Lottery {
    /// Builds a lottery from `(probability, reward)` pairs, merging repeated
    /// rewards.
    pub fn new<S: Into<String>>(outcomes: impl IntoIterator<Item = (f64, S)>) -> Result<Self> {
        let mut probs = BTreeMap::new();
        for (p, r) in outcomes {
            if !(0.0..=1.0 + PROB_TOL).contains(&p) {
                return Err(Error::InvalidArgument(format!("probability {p} is outside [0, 1]")));
            }
            *probs.entry(r.into()).or_insert(0.0) += p;
        }
        let sum: f64 = probs.values().sum();
        if probs.is_empty() || (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::WeightSumError { sum });
        }
        Ok(Self { probs })
    }

    pub fn degenerate(reward: impl Into<String>) -> Self {
        Self {
            probs: BTreeMap::from([(reward.into(), 1.0)]),
        }
    }

    pub fn prob(&self, reward: &str) -> f64 {
        self.probs.get(reward).copied().unwrap_or(0.0)
    }

    pub fn outcomes(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(r, &p)| (r.as_str(), p))
    }
}

impl fmt::Display for Lottery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .probs
            .iter()
            .filter(|(_, &p)| p > 0.0)
            .map(|(r, p)| format!("{r}:{p:.6}"))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// `t·A + (1 − t)·B`.
pub fn mix(a: &Lottery, b: &Lottery, t: f64) -> Result<Lottery> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("mixing weight {t} is outside [0, 1]")));
    }
    let mut probs: BTreeMap<String, f64> = BTreeMap::new();
    for (r, p) in a.outcomes() {
        *probs.entry(r.to_string()).or_insert(0.0) += t * p;
    }
    for (r, p) in b.outcomes() {
        *probs.entry(r.to_string()).or_insert(0.0) += (1.0 - t) * p;
    }
    let sum: f64 = probs.values().sum();
    for p in probs.values_mut() {
        *p /= sum;
    }
    Ok(Lottery { probs })
}

pub fn expected_utility_classical(a: &Lottery, u: &UtilityTable) -> Result<f64> {
    a.outcomes().map(|(r, p)| Ok(p * u.get(r)?)).sum()
}

/// A preference order on lotteries; `Greater` means the left one is
/// strictly preferred.
pub trait LotteryOracle {
    fn name(&self) -> &str;
    fn compare(&self, a: &Lottery, b: &Lottery) -> Result<Ordering>;
}

/// The expected-utility order for a fixed utility table.
#[derive(Clone, Debug)]
pub struct PmeuOracle {
    pub utility: UtilityTable,
}

impl LotteryOracle for PmeuOracle {
    fn name(&self) -> &str {
        "pmeu"
    }

    fn compare(&self, a: &Lottery, b: &Lottery) -> Result<Ordering> {
        Ok(banded(
            expected_utility_classical(a, &self.utility)?,
            expected_utility_classical(b, &self.utility)?,
            EPS_EU,
        ))
    }
}

/// Ranks lotteries by the probability of `keys[0]`, breaking ties with
/// `keys[1]` and so on.
#[derive(Clone, Debug)]
pub struct LexicographicOracle {
    pub keys: Vec<String>,
}

impl LotteryOracle for LexicographicOracle {
    fn name(&self) -> &str {
        "lexicographic"
    }

    fn compare(&self, a: &Lottery, b: &Lottery) -> Result<Ordering> {
        Ok(self
            .keys
            .iter()
            .map(|k| banded(a.prob(k), b.prob(k), EPS_EU))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal))
    }
}

/// Utilities by bisecting, for each reward, the indifference weight of the
/// standard gamble between `r1` and `r0`.
pub fn vnm_elicit(
    oracle: &dyn LotteryOracle,
    rewards: &[String],
    r0: &str,
    r1: &str,
    tol: f64,
) -> Result<UtilityTable> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let (low, high) = (Lottery::degenerate(r0), Lottery::degenerate(r1));
    if oracle.compare(&high, &low)? != Ordering::Greater {
        return Err(Error::NonMonotoneOracle(format!("`{r1}` is not preferred to `{r0}`")));
    }
    let mut values = BTreeMap::new();
    for r in rewards {
        let value = if r == r0 {
            0.0
        } else if r == r1 {
            1.0
        } else {
            let sure = Lottery::degenerate(r.clone());
            if oracle.compare(&sure, &low)? == Ordering::Less || oracle.compare(&sure, &high)? == Ordering::Greater {
                return Err(Error::NonMonotoneOracle(format!(
                    "`{r}` lies outside the extremal rewards"
                )));
            }
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                match oracle.compare(&sure, &mix(&high, &low, mid)?)? {
                    Ordering::Greater => lo = mid,
                    Ordering::Less => hi = mid,
                    Ordering::Equal => {
                        lo = mid;
                        hi = mid;
                    }
                }
            }
            0.5 * (lo + hi)
        };
        values.insert(r.clone(), value);
    }
    Ok(UtilityTable::new(values))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LotteryWitness {
    pub note: String,
    pub lotteries: Vec<(String, Lottery)>,
    pub weights: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VnmCheck {
    pub axiom: String,
    pub status: Status,
    pub checks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<LotteryWitness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VnmReport {
    pub oracle: String,
    pub lotteries: usize,
    pub samples: usize,
    pub seed: u64,
    pub results: Vec<VnmCheck>,
}

impl VnmReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.status != Status::Fail)
    }

    pub fn result(&self, axiom: &str) -> Option<&VnmCheck> {
        self.results.iter().find(|r| r.axiom == axiom)
    }
}

impl fmt::Display for VnmReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "vnm axioms (oracle {}, {} lotteries, samples {}, seed {})",
            self.oracle, self.lotteries, self.samples, self.seed
        )?;
        for r in &self.results {
            writeln!(f, "  {:<16} {:<8} {} checks", r.axiom, r.status.to_string(), r.checks)?;
            if let Some(w) = &r.witness {
                writeln!(f, "      witness: {}", w.note)?;
                for (label, l) in &w.lotteries {
                    writeln!(f, "        {label} = {l}")?;
                }
                for (k, v) in &w.weights {
                    writeln!(f, "        {k} = {v}")?;
                }
            }
        }
        write!(f, "overall: {}", if self.passed() { "pass" } else { "FAIL" })
    }
}

struct Check {
    axiom: &'static str,
    checks: usize,
    witness: Option<LotteryWitness>,
}

impl Check {
    fn new(axiom: &'static str) -> Self {
        Self {
            axiom,
            checks: 0,
            witness: None,
        }
    }

    fn expect(&mut self, ok: bool, w: impl FnOnce() -> LotteryWitness) {
        self.checks += 1;
        if !ok && self.witness.is_none() {
            self.witness = Some(w());
        }
    }

    /// Zero checks is a vacuous pass: the premise never held.
    fn finish(self) -> VnmCheck {
        VnmCheck {
            axiom: self.axiom.to_string(),
            status: if self.witness.is_some() {
                Status::Fail
            } else {
                Status::Pass
            },
            checks: self.checks,
            witness: self.witness,
        }
    }
}

fn witness(note: impl Into<String>, lotteries: &[(&str, &Lottery)], weights: &[(&str, f64)]) -> LotteryWitness {
    LotteryWitness {
        note: note.into(),
        lotteries: lotteries.iter().map(|(l, x)| (l.to_string(), (*x).clone())).collect(),
        weights: weights.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

/// Mixing weights tried when searching for Archimedean witnesses. The
/// grid stops near 1e-6 so that mixtures stay well outside the tie band.
fn archimedean_grid() -> impl Iterator<Item = f64> {
    (1..=20).map(|j| 0.5f64.powi(j))
}

/// Sampled checks of the expected-utility axioms on `lotteries`.
pub fn check_vnm_axioms(
    oracle: &dyn LotteryOracle,
    lotteries: &[Lottery],
    samples: usize,
    seed: u64,
) -> Result<VnmReport> {
    let n = lotteries.len();
    let mut rel = vec![vec![Ordering::Equal; n]; n];
    for i in 0..n {
        for j in 0..n {
            rel[i][j] = oracle.compare(&lotteries[i], &lotteries[j])?;
        }
    }
    let lot = |i: usize| &lotteries[i];

    let mut ord = Check::new("Completeness");
    for i in 0..n {
        for j in 0..n {
            ord.expect(rel[i][j] == rel[j][i].reverse(), || {
                witness("verdicts are not antisymmetric", &[("A", lot(i)), ("B", lot(j))], &[])
            });
        }
    }
    let mut trans = Check::new("Transitivity");
    for a in 0..n {
        for b in 0..n {
            if rel[a][b] == Ordering::Less {
                continue;
            }
            for c in 0..n {
                if rel[b][c] == Ordering::Less {
                    continue;
                }
                trans.expect(rel[a][c] != Ordering::Less, || {
                    witness(
                        "A >= B >= C but A < C",
                        &[("A", lot(a)), ("B", lot(b)), ("C", lot(c))],
                        &[],
                    )
                });
            }
        }
    }

    let mut rng = stream_rng(seed, 41);
    let strict: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| rel[i][j] == Ordering::Greater)
        .collect();
    let ties: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && rel[i][j] == Ordering::Equal)
        .collect();
    let rel = &rel;
    let chains: Vec<(usize, usize, usize)> = strict
        .iter()
        .flat_map(|&(a, b)| {
            (0..n)
                .filter(move |&c| rel[b][c] == Ordering::Greater)
                .map(move |c| (a, b, c))
        })
        .collect();

    let mut indep = Check::new("Independence");
    let mut mono = Check::new("Monotonicity");
    if !strict.is_empty() {
        for _ in 0..samples {
            let &(a, b) = strict.choose(&mut rng).expect("nonempty");
            let c = rng.random_range(0..n);
            let t: f64 = 1.0 - rng.random::<f64>();
            let (ma, mb) = (mix(lot(a), lot(c), t)?, mix(lot(b), lot(c), t)?);
            let o = oracle.compare(&ma, &mb)?;
            indep.expect(o == Ordering::Greater, || {
                witness(
                    "A > B but the mixtures with C are not ordered the same way",
                    &[("A", lot(a)), ("B", lot(b)), ("C", lot(c))],
                    &[("t", t)],
                )
            });
            let (s, t) = {
                let x: f64 = rng.random();
                let y: f64 = rng.random();
                (x.max(y), x.min(y))
            };
            if s - t > 1e-6 {
                let (hi, lo) = (mix(lot(a), lot(b), s)?, mix(lot(a), lot(b), t)?);
                let o = oracle.compare(&hi, &lo)?;
                mono.expect(o == Ordering::Greater, || {
                    witness(
                        "a larger share of the better lottery is not preferred",
                        &[("A", lot(a)), ("B", lot(b))],
                        &[("s", s), ("t", t)],
                    )
                });
            }
        }
    }

    let mut subst = Check::new("Substitutability");
    if !ties.is_empty() {
        for _ in 0..samples {
            let &(a, b) = ties.choose(&mut rng).expect("nonempty");
            let c = rng.random_range(0..n);
            let t: f64 = rng.random();
            let o = oracle.compare(&mix(lot(a), lot(c), t)?, &mix(lot(b), lot(c), t)?)?;
            subst.expect(o == Ordering::Equal, || {
                witness(
                    "A ~ B but their mixtures with C differ",
                    &[("A", lot(a)), ("B", lot(b)), ("C", lot(c))],
                    &[("t", t)],
                )
            });
        }
    }

    let mut arch = Check::new("Archimedean");
    let mut cont = Check::new("Continuity");
    let picked: Vec<(usize, usize, usize)> = if chains.len() > samples {
        chains.choose_multiple(&mut rng, samples).copied().collect()
    } else {
        chains.clone()
    };
    for (a, b, c) in picked {
        let (la, lb, lc) = (lot(a), lot(b), lot(c));
        let mut upper = None;
        for e in archimedean_grid() {
            if oracle.compare(&mix(la, lc, 1.0 - e)?, lb)? == Ordering::Greater {
                upper = Some(1.0 - e);
                break;
            }
        }
        let mut lower = None;
        for e in archimedean_grid() {
            if oracle.compare(lb, &mix(la, lc, e)?)? == Ordering::Greater {
                lower = Some(e);
                break;
            }
        }
        arch.expect(upper.is_some() && lower.is_some(), || {
            witness(
                "no mixture of A and C on one side of B",
                &[("A", la), ("B", lb), ("C", lc)],
                &[
                    ("t_found", upper.unwrap_or(f64::NAN)),
                    ("s_found", lower.unwrap_or(f64::NAN)),
                ],
            )
        });

        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            match oracle.compare(&mix(la, lc, mid)?, lb)? {
                Ordering::Less => lo = mid,
                Ordering::Greater => hi = mid,
                Ordering::Equal => {
                    lo = mid;
                    hi = mid;
                    break;
                }
            }
        }
        let t = 0.5 * (lo + hi);
        let at = oracle.compare(&mix(la, lc, t)?, lb)?;
        let below = t > 1e-6 && oracle.compare(&mix(la, lc, t - 1e-6)?, lb)? == Ordering::Less || t <= 1e-6;
        let above =
            t < 1.0 - 1e-6 && oracle.compare(&mix(la, lc, t + 1e-6)?, lb)? == Ordering::Greater || t >= 1.0 - 1e-6;
        cont.expect(at == Ordering::Equal && below && above && t > 0.0 && t < 1.0, || {
            witness(
                "no unique mixture of A and C indifferent to B",
                &[("A", la), ("B", lb), ("C", lc)],
                &[("t", t)],
            )
        });
    }

    Ok(VnmReport {
        oracle: oracle.name().to_string(),
        lotteries: n,
        samples,
        seed,
        results: [ord, trans, indep, arch, subst, mono, cont]
            .into_iter()
            .map(Check::finish)
            .collect(),
    })
}

/// `n` random lotteries over `rewards`, each with a random support, plus
/// every degenerate lottery.
pub fn random_lotteries<R: Rng + ?Sized>(rng: &mut R, rewards: &[String], n: usize) -> Vec<Lottery> {
    let mut out: Vec<Lottery> = rewards.iter().map(|r| Lottery::degenerate(r.clone())).collect();
    for _ in 0..n {
        let raw: Vec<f64> = rewards
            .iter()
            .map(|_| {
                if rng.random_bool(0.3) {
                    0.0
                } else {
                    rng.random::<f64>() + 1e-3
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        if total == 0.0 {
            continue;
        }
        let probs = BTreeMap::from_iter(rewards.iter().cloned().zip(raw.iter().map(|x| x / total)));
        out.push(Lottery { probs });
    }
    out
}

/// A classical act: the payoff id for each state of the world.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalAct {
    pub payoffs: BTreeMap<String, String>,
}

impl ClassicalAct {
    /// `[E, x; y]`: payoff `x` on `event`, `y` elsewhere.
    pub fn bet(states: &[String], event: &BTreeSet<String>, x: &str, y: &str) -> Self {
        Self {
            payoffs: states
                .iter()
                .map(|s| (s.clone(), if event.contains(s) { x } else { y }.to_string()))
                .collect(),
        }
    }

    pub fn constant(states: &[String], x: &str) -> Self {
        Self::bet(states, &BTreeSet::new(), x, x)
    }
}

pub trait ActOracle {
    fn compare(&self, f: &ClassicalAct, g: &ClassicalAct) -> Result<Ordering>;
}

/// Subjective expected utility with a planted measure on states.
#[derive(Clone, Debug)]
pub struct PlantedMeasureOracle {
    pub measure: BTreeMap<String, f64>,
    pub utility: BTreeMap<String, f64>,
}

impl PlantedMeasureOracle {
    pub fn probability(&self, event: &BTreeSet<String>) -> f64 {
        event.iter().map(|s| self.measure.get(s).copied().unwrap_or(0.0)).sum()
    }

    fn value(&self, f: &ClassicalAct) -> Result<f64> {
        f.payoffs
            .iter()
            .map(|(s, x)| {
                let u = self.utility.get(x).ok_or_else(|| Error::MissingUtility(x.clone()))?;
                Ok(self.measure.get(s).copied().unwrap_or(0.0) * u)
            })
            .sum()
    }
}

impl ActOracle for PlantedMeasureOracle {
    fn compare(&self, f: &ClassicalAct, g: &ClassicalAct) -> Result<Ordering> {
        Ok(banded(self.value(f)?, self.value(g)?, EPS_EU))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavageBracket {
    /// Fewest cells whose union is judged at least as likely as the event.
    pub cells_needed: usize,
    pub cells: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Brackets the subjective probability of `event` between `(m − 1)/n` and
/// `m/n`, where `m` is the fewest equally likely cells whose union the
/// oracle ranks at least as likely as `event`.
pub fn savage_probability(
    oracle: &dyn ActOracle,
    states: &[String],
    event: &BTreeSet<String>,
    cells: &[BTreeSet<String>],
    x: &str,
    y: &str,
) -> Result<SavageBracket> {
    let n = cells.len();
    if n == 0 {
        return Err(Error::NotEquipartition("no cells".into()));
    }
    let universe: BTreeSet<String> = states.iter().cloned().collect();
    let mut seen = BTreeSet::new();
    for (i, c) in cells.iter().enumerate() {
        if let Some(s) = c.iter().find(|s| !seen.insert((*s).clone())) {
            return Err(Error::NotEquipartition(format!(
                "state `{s}` lies in more than one cell (cell {i})"
            )));
        }
    }
    if seen != universe {
        return Err(Error::NotEquipartition("cells do not cover the state set".into()));
    }
    if !event.is_subset(&universe) {
        return Err(Error::InvalidArgument("event contains unknown states".into()));
    }
    if oracle.compare(&ClassicalAct::constant(states, x), &ClassicalAct::constant(states, y))? != Ordering::Greater {
        return Err(Error::InvalidArgument(format!(
            "payoff `{x}` is not preferred to `{y}`"
        )));
    }
    let bet = |e: &BTreeSet<String>| ClassicalAct::bet(states, e, x, y);
    let cell_bets: Vec<ClassicalAct> = cells.iter().map(bet).collect();
    for i in 0..n {
        for j in i + 1..n {
            if oracle.compare(&cell_bets[i], &cell_bets[j])? != Ordering::Equal {
                return Err(Error::NotEquipartition(format!(
                    "cells {i} and {j} are not equally likely"
                )));
            }
        }
    }
    let target = bet(event);
    let mut union = BTreeSet::new();
    let mut m = 0;
    while oracle.compare(&bet(&union), &target)? == Ordering::Less {
        union.extend(cells[m].iter().cloned());
        m += 1;
    }
    let (lower, upper) = if m == 0 {
        (0.0, 0.0)
    } else {
        ((m - 1) as f64 / n as f64, m as f64 / n as f64)
    };
    Ok(SavageBracket {
        cells_needed: m,
        cells: n,
        lower,
        upper,
    })
}

/// `count` states of equal planted weight split into `n` contiguous cells.
pub fn uniform_world(count: usize, n: usize) -> Result<(Vec<String>, Vec<BTreeSet<String>>, BTreeMap<String, f64>)> {
    if n == 0 || count % n != 0 {
        return Err(Error::NotEquipartition(format!(
            "{count} states cannot be split into {n} equal cells"
        )));
    }
    let states: Vec<String> = (0..count).map(|i| format!("s{i}")).collect();
    let per = count / n;
    let cells = (0..n)
        .map(|c| states[c * per..(c + 1) * per].iter().cloned().collect())
        .collect();
    let measure = states.iter().map(|s| (s.clone(), 1.0 / count as f64)).collect();
    Ok((states, cells, measure))
}
