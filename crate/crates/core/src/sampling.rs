//! Random states, subspaces, isometries and instances for sampled audits.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hilbert::{pivoted_gram_schmidt, PartialIsometryAct, StateVector, Subspace, C64, EPS_RANK};
use crate::problem::{Macrostate, QuantumDecisionProblem, Reward};

/// A deterministic generator for sub-stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Plain (unpivoted) Gram-Schmidt on the columns of `m`, which must have
/// full column rank.
pub fn orthonormal_columns(m: &DMatrix<C64>) -> DMatrix<C64> {
    let mut cols: Vec<DVector<C64>> = Vec::with_capacity(m.ncols());
    for c in m.column_iter() {
        let mut v = c.into_owned();
        for _ in 0..2 {
            for q in &cols {
                let k = q.dotc(&v);
                v -= q * k;
            }
        }
        let n = v.norm();
        cols.push(v / C64::new(n, 0.0));
    }
    if cols.is_empty() {
        return DMatrix::zeros(m.nrows(), 0);
    }
    DMatrix::from_columns(&cols)
}

pub fn random_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> StateVector {
    let v = DVector::from_fn(dim, |_, _| gaussian(rng));
    let n = v.norm();
    StateVector::from_vector(v / C64::new(n, 0.0))
}

/// A random unit vector inside `sub`.
pub fn random_state_in<R: Rng + ?Sized>(rng: &mut R, sub: &Subspace) -> Result<StateVector> {
    if sub.is_zero() {
        return Err(Error::ZeroSubspace);
    }
    let c = DVector::from_fn(sub.dim(), |_, _| gaussian(rng));
    let v = sub.basis() * c;
    let n = v.norm();
    Ok(StateVector::from_vector(v / C64::new(n, 0.0)))
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<C64> {
    orthonormal_columns(&gaussian_matrix(rng, dim, dim))
}

pub fn random_subspace<R: Rng + ?Sized>(rng: &mut R, dim: usize, k: usize) -> Subspace {
    Subspace::from_columns(&gaussian_matrix(rng, dim, k), EPS_RANK)
}

/// A random isometry from `domain` into `target`.
pub fn random_isometry<R: Rng + ?Sized>(
    rng: &mut R,
    domain: &Subspace,
    target: &Subspace,
) -> Result<PartialIsometryAct> {
    let k = domain.dim();
    if k > target.dim() {
        return Err(Error::InsufficientDimension(format!(
            "cannot embed {k} dimension(s) into {}",
            target.dim()
        )));
    }
    let coords = orthonormal_columns(&gaussian_matrix(rng, target.dim(), k));
    PartialIsometryAct::new(domain.clone(), target.basis() * coords)
}

/// An isometry on `domain` sending the direction of `psi` to `target` and
/// the rest of the domain to random directions of `room` orthogonal to it.
pub fn steer<R: Rng + ?Sized>(
    rng: &mut R,
    domain: &Subspace,
    psi: &StateVector,
    target: &StateVector,
    room: &Subspace,
) -> Result<PartialIsometryAct> {
    let k = domain.dim();
    if k > room.dim() {
        return Err(Error::InsufficientDimension(format!(
            "cannot steer {k} dimension(s) into {}",
            room.dim()
        )));
    }
    if !domain.contains(psi) || !room.contains(target) {
        return Err(Error::OutsideDomain {
            residual: domain.residual(psi)?.max(room.residual(target)?),
        });
    }
    let head = psi.normalized()?.into_vector();
    let goal = target.normalized()?.into_vector();
    let mut frame = vec![head.clone()];
    let mut rest: Vec<DVector<C64>> = domain.basis().column_iter().map(|c| c.into_owned()).collect();
    for r in &mut rest {
        let c = head.dotc(r);
        *r -= &head * c;
    }
    frame.extend(pivoted_gram_schmidt(rest, 1e-6, k - 1));
    let mut images = vec![goal.clone()];
    if k > 1 {
        let mut raw = room.basis() * gaussian_matrix(rng, room.dim(), k - 1);
        for mut col in raw.column_iter_mut() {
            let c = goal.dotc(&col.clone_owned());
            col -= &goal * c;
        }
        images.extend(orthonormal_columns(&raw).column_iter().map(|c| c.into_owned()));
    }
    let d = domain.ambient_dim();
    let mut op = DMatrix::zeros(d, d);
    for (img, f) in images.iter().zip(&frame) {
        op += img * f.adjoint();
    }
    PartialIsometryAct::from_operator(domain.clone(), &op)
}

/// A nearby act: `radius` times a unit-Frobenius Gaussian direction is added
/// to the domain matrix and the columns are re-orthonormalized.
pub fn perturb<R: Rng + ?Sized>(rng: &mut R, act: &PartialIsometryAct, radius: f64) -> Result<PartialIsometryAct> {
    let m = act.matrix();
    let g = gaussian_matrix(rng, m.nrows(), m.ncols());
    let n = g.norm();
    let moved = m + g * C64::new(radius / n, 0.0);
    PartialIsometryAct::new(act.domain().clone(), orthonormal_columns(&moved))
}

/// Macrostate dimensions and reward membership for a random instance. The
/// first reward is flagged r0 and the last r1.
#[derive(Clone, Debug)]
pub struct Layout {
    pub macrostate_dims: Vec<usize>,
    pub rewards: Vec<Vec<usize>>,
}

impl Layout {
    pub fn dim(&self) -> usize {
        self.macrostate_dims.iter().sum()
    }
}

/// A valid instance with the given layout, its macrostates spanned by the
/// columns of a random unitary.
pub fn random_problem<R: Rng + ?Sized>(rng: &mut R, layout: &Layout) -> QuantumDecisionProblem {
    let d = layout.dim();
    let frame = random_unitary(rng, d);
    let mut start = 0;
    let macrostates = layout
        .macrostate_dims
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let block = frame.columns(start, k).into_owned();
            start += k;
            Macrostate {
                id: format!("M{i}"),
                subspace: Subspace::from_columns(&block, EPS_RANK),
            }
        })
        .collect();
    let last = layout.rewards.len() - 1;
    let rewards = layout
        .rewards
        .iter()
        .enumerate()
        .map(|(i, members)| Reward {
            id: match i {
                0 => "r0".to_string(),
                i if i == last => "r1".to_string(),
                i => format!("s{i}"),
            },
            members: members.clone(),
            erasure: members[0],
            is_r0: i == 0,
            is_r1: i == last,
        })
        .collect();
    QuantumDecisionProblem::new(d, macrostates, rewards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::validate_problem;

    #[test]
    fn random_problem_is_valid() {
        let mut rng = stream_rng(7, 0);
        let layout = Layout {
            macrostate_dims: vec![2, 1, 1, 1, 3],
            rewards: vec![vec![0], vec![1, 2], vec![3, 4]],
        };
        let p = random_problem(&mut rng, &layout);
        assert!(validate_problem(&p).is_valid());
    }

    #[test]
    fn perturbation_stays_close() {
        let mut rng = stream_rng(1, 0);
        let dom = random_subspace(&mut rng, 6, 3);
        let u = random_isometry(&mut rng, &dom, &Subspace::full(6)).unwrap();
        let v = perturb(&mut rng, &u, 1e-4).unwrap();
        assert!((u.operator() - v.operator()).norm() < 1e-3);
    }

    #[test]
    fn streams_are_independent() {
        let a = random_state(&mut stream_rng(3, 0), 4);
        let b = random_state(&mut stream_rng(3, 1), 4);
        let a2 = random_state(&mut stream_rng(3, 0), 4);
        assert_eq!(a, a2);
        assert!(a.distance(&b) > 1e-6);
    }
}
