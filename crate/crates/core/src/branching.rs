//! Repeated-measurement branching trees aggregated by outcome counts.
//!
//! A depth-`n` tree over `k` outcomes has `k^n` leaves, but every leaf with
//! the same count vector carries the same squared amplitude, so the tree is
//! stored as one node per count vector together with its multiplicity.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::forge::validate_weights;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// `ln(i!)` for `i = 0..=n`.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = CompensatedSum::default();
    out.push(0.0);
    for i in 1..=n {
        acc.add((i as f64).ln());
        out.push(acc.value());
    }
    out
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `n! / Π c_j!`.
pub fn multinomial(counts: &[u32]) -> BigUint {
    let mut acc = BigUint::one();
    let mut total = 0u64;
    for &c in counts {
        total += c as u64;
        acc *= binomial(total, c as u64);
    }
    acc
}

/// All branches sharing one outcome-count vector.
#[derive(Clone, Debug, PartialEq)]
pub struct CountNode {
    pub counts: Vec<u32>,
    pub ln_multiplicity: f64,
    /// `ln Π w_j^{c_j}`, the squared amplitude of each single branch.
    pub ln_amplitude2: f64,
}

impl CountNode {
    pub fn multiplicity(&self) -> BigUint {
        multinomial(&self.counts)
    }

    /// Squared amplitude of one branch of this node.
    pub fn amplitude2(&self) -> f64 {
        self.ln_amplitude2.exp()
    }

    /// Squared-amplitude mass of all branches of this node together.
    pub fn mass(&self) -> f64 {
        (self.ln_multiplicity + self.ln_amplitude2).exp()
    }
}

#[derive(Clone, Debug)]
pub struct BranchTree {
    weights: Vec<f64>,
    depth: usize,
    nodes: Vec<CountNode>,
}

/// Count vectors of length `k` summing to `n`, lexicographically ascending.
fn count_vectors(k: usize, n: u32) -> Vec<Vec<u32>> {
    fn rec(k: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(k - 1, left - c, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, n, &mut Vec::with_capacity(k), &mut out);
    out
}

impl BranchTree {
    /// The tree after `n` repetitions of a measurement with outcome weights
    /// `weights`.
    pub fn grow(weights: &[f64], n: usize) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("at least one outcome is required".into()));
        }
        validate_weights(weights)?;
        let depth = u32::try_from(n).map_err(|_| Error::InvalidArgument("depth too large".into()))?;
        let lf = ln_factorials(n);
        let ln_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        let nodes = count_vectors(weights.len(), depth)
            .into_iter()
            .map(|counts| {
                let ln_multiplicity = lf[n] - counts.iter().map(|&c| lf[c as usize]).sum::<f64>();
                let ln_amplitude2 = counts
                    .iter()
                    .zip(&ln_w)
                    .filter(|(&c, _)| c > 0)
                    .map(|(&c, lw)| c as f64 * lw)
                    .sum();
                CountNode {
                    counts,
                    ln_multiplicity,
                    ln_amplitude2,
                }
            })
            .collect();
        Ok(Self {
            weights: weights.to_vec(),
            depth: n,
            nodes,
        })
    }

    pub fn arity(&self) -> usize {
        self.weights.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn nodes(&self) -> &[CountNode] {
        &self.nodes
    }

    /// Total squared amplitude over all leaves; 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.nodes
            .iter()
            .map(CountNode::mass)
            .collect::<CompensatedSum>()
            .value()
    }

    /// `k^n`.
    pub fn leaf_count(&self) -> BigUint {
        BigUint::from(self.arity()).pow(self.depth as u32)
    }
}

/// Count vector with the most branches; ties go to the lexicographically
/// smallest vector.
pub fn modal_counts(tree: &BranchTree) -> Vec<u32> {
    let best = tree
        .nodes()
        .iter()
        .map(|n| n.ln_multiplicity)
        .fold(f64::NEG_INFINITY, f64::max);
    // Rounding in the log domain can split exact ties, so candidates near
    // the maximum are settled with exact multiplicities.
    let mut winner: Option<(&CountNode, BigUint)> = None;
    for node in tree.nodes() {
        if node.ln_multiplicity < best - 1e-9 * best.abs().max(1.0) {
            continue;
        }
        let m = node.multiplicity();
        match &winner {
            Some((_, w)) if m <= *w => {}
            _ => winner = Some((node, m)),
        }
    }
    winner.expect("trees have at least one node").0.counts.clone()
}

/// Outcome frequencies of the modal count vector: what an agent counting
/// branches would expect to see.
pub fn counting_frequencies(tree: &BranchTree) -> Vec<f64> {
    let n = tree.depth().max(1) as f64;
    if tree.depth() == 0 {
        return vec![0.0; tree.arity()];
    }
    modal_counts(tree).iter().map(|&c| c as f64 / n).collect()
}

fn deviates(c: usize, n: usize, w1: f64, eps: f64) -> bool {
    // Counts exactly on the band edge stay inside it.
    (c as f64 - n as f64 * w1).abs() - n as f64 * eps > 1e-9
}

/// Squared-amplitude mass of branches whose first-outcome frequency lies
/// within `eps` of `w[0]`, and of those that deviate further.
pub fn deviation_split(w: &[f64], n: usize, eps: f64) -> Result<(f64, f64)> {
    if w.len() != 2 {
        return Err(Error::InvalidArgument(
            "deviation norms are defined for two outcomes".into(),
        ));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    validate_weights(w)?;
    let lf = ln_factorials(n);
    let (l1, l2) = (w[0].ln(), w[1].ln());
    let mut inside = CompensatedSum::default();
    let mut outside = CompensatedSum::default();
    for c in 0..=n {
        let mut ln = lf[n] - lf[c] - lf[n - c];
        if c > 0 {
            ln += c as f64 * l1;
        }
        if c < n {
            ln += (n - c) as f64 * l2;
        }
        if deviates(c, n, w[0], eps) {
            outside.add(ln.exp());
        } else {
            inside.add(ln.exp());
        }
    }
    Ok((inside.value(), outside.value()))
}

/// Total squared amplitude of the branches deviating by more than `eps`
/// from the weight of the first outcome.
pub fn born_deviation_norm(w: &[f64], n: usize, eps: f64) -> Result<f64> {
    deviation_split(w, n, eps).map(|(_, out)| out)
}

/// Number of branches whose squared amplitude exceeds `theta`.
pub fn coarse_grain_count(tree: &BranchTree, theta: f64) -> Result<BigUint> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidArgument("threshold must lie in [0, 1]".into()));
    }
    let cut = if theta == 0.0 { f64::NEG_INFINITY } else { theta.ln() };
    Ok(tree
        .nodes()
        .iter()
        .filter(|n| n.ln_amplitude2 > cut)
        .map(CountNode::multiplicity)
        .sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationRow {
    pub n: usize,
    pub eps: f64,
    pub squared_amplitude_mass: f64,
}

pub fn deviation_series(w: &[f64], ns: &[usize], eps: f64) -> Result<Vec<DeviationRow>> {
    ns.iter()
        .map(|&n| {
            Ok(DeviationRow {
                n,
                eps,
                squared_amplitude_mass: born_deviation_norm(w, n, eps)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrainRow {
    pub theta: f64,
    pub count: BigUint,
}

pub fn grain_series(tree: &BranchTree, thetas: &[f64]) -> Result<Vec<GrainRow>> {
    thetas
        .iter()
        .map(|&theta| {
            Ok(GrainRow {
                theta,
                count: coarse_grain_count(tree, theta)?,
            })
        })
        .collect()
}
