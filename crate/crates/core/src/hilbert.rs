//! Finite-dimensional complex linear algebra: state vectors, subspaces with
//! their lattice operations, orthogonal projections and partial isometries.
//!
//! Subspaces are stored as orthonormal bases in a canonical gauge (pivoted
//! Gram-Schmidt over the columns of the projector), but equality is always
//! decided on projectors.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Orthogonality and membership tolerance.
pub const EPS_ORTH: f64 = 1e-9;
/// Norm-preservation tolerance.
pub const EPS_NORM: f64 = 1e-9;
/// Rank-decision tolerance.
pub const EPS_RANK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(DVector<C64>);

impl StateVector {
    pub fn new(components: Vec<C64>) -> Self {
        Self(DVector::from_vec(components))
    }

    pub fn from_real(components: &[f64]) -> Self {
        Self(DVector::from_iterator(
            components.len(),
            components.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    pub fn from_vector(v: DVector<C64>) -> Self {
        Self(v)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    /// The `index`-th standard basis vector.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<C64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n <= EPS_NORM {
            return Err(Error::ZeroState);
        }
        Ok(Self(&self.0 / C64::new(n, 0.0)))
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= EPS_NORM
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        (&self.0 - &other.0).norm()
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: &StateVector) -> StateVector {
        StateVector(&self.0 + &rhs.0)
    }
}

impl Sub for &StateVector {
    type Output = StateVector;
    fn sub(self, rhs: &StateVector) -> StateVector {
        StateVector(&self.0 - &rhs.0)
    }
}

impl Mul<C64> for &StateVector {
    type Output = StateVector;
    fn mul(self, rhs: C64) -> StateVector {
        StateVector(&self.0 * rhs)
    }
}

/// Gram-Schmidt with column pivoting: repeatedly takes the input with the
/// largest residual (lowest index on ties) until every residual falls to
/// `threshold` or `max_rank` vectors have been produced.
pub(crate) fn pivoted_gram_schmidt(
    mut residuals: Vec<DVector<C64>>,
    threshold: f64,
    max_rank: usize,
) -> Vec<DVector<C64>> {
    let mut basis: Vec<DVector<C64>> = Vec::new();
    let mut used = vec![false; residuals.len()];
    while basis.len() < max_rank {
        let mut best: Option<(usize, f64)> = None;
        for (j, r) in residuals.iter().enumerate() {
            if used[j] {
                continue;
            }
            let n = r.norm();
            match best {
                Some((_, bn)) if n <= bn + 1e-12 => {}
                _ => best = Some((j, n)),
            }
        }
        let Some((j, n)) = best else { break };
        if n <= threshold {
            break;
        }
        used[j] = true;
        let mut q = &residuals[j] / C64::new(n, 0.0);
        for b in &basis {
            let c = b.dotc(&q);
            q -= b * c;
        }
        let qn = q.norm();
        q /= C64::new(qn, 0.0);
        for (i, r) in residuals.iter_mut().enumerate() {
            if !used[i] {
                let c = q.dotc(r);
                *r -= &q * c;
            }
        }
        basis.push(q);
    }
    basis
}

fn columns(m: &DMatrix<C64>) -> Vec<DVector<C64>> {
    m.column_iter().map(|c| c.into_owned()).collect()
}

fn stack(dim: usize, cols: &[DVector<C64>]) -> DMatrix<C64> {
    if cols.is_empty() {
        return DMatrix::zeros(dim, 0);
    }
    DMatrix::from_columns(cols)
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A subspace of `ℂ^d` held as a canonical orthonormal basis (`d × k`).
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: DMatrix<C64>,
}

impl Subspace {
    pub fn zero(dim: usize) -> Self {
        Self {
            basis: DMatrix::zeros(dim, 0),
        }
    }

    pub fn full(dim: usize) -> Self {
        Self {
            basis: DMatrix::identity(dim, dim),
        }
    }

    /// Span of the columns of `m`, with numerical rank decided at `tol`.
    pub fn from_columns(m: &DMatrix<C64>, tol: f64) -> Self {
        let dim = m.nrows();
        let scale = m.column_iter().map(|c| c.norm()).fold(1.0, f64::max);
        let raw = pivoted_gram_schmidt(columns(m), tol * scale, dim);
        Self::canonical(dim, &raw)
    }

    fn canonical(dim: usize, orthonormal: &[DVector<C64>]) -> Self {
        let rank = orthonormal.len();
        if rank == 0 {
            return Self::zero(dim);
        }
        if rank == dim {
            return Self::full(dim);
        }
        let q = stack(dim, orthonormal);
        let projector = &q * q.adjoint();
        let basis = pivoted_gram_schmidt(columns(&projector), 0.0, rank);
        Self {
            basis: stack(dim, &basis),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &DMatrix<C64> {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<StateVector> {
        self.basis.column_iter().map(|c| StateVector(c.into_owned())).collect()
    }

    pub fn projector(&self) -> DMatrix<C64> {
        &self.basis * self.basis.adjoint()
    }

    pub fn project(&self, psi: &StateVector) -> Result<StateVector> {
        psi.check_dim(self.ambient_dim())?;
        Ok(StateVector(&self.basis * (self.basis.adjoint() * &psi.0)))
    }

    /// Norm of the component of `psi` orthogonal to this subspace.
    pub fn residual(&self, psi: &StateVector) -> Result<f64> {
        let p = self.project(psi)?;
        Ok(psi.distance(&p))
    }

    pub fn contains(&self, psi: &StateVector) -> bool {
        match self.residual(psi) {
            Ok(r) => r <= EPS_ORTH * psi.norm().max(1.0),
            Err(_) => false,
        }
    }

    pub fn approx_eq(&self, other: &Subspace) -> bool {
        self.ambient_dim() == other.ambient_dim() && max_abs(&(self.projector() - other.projector())) <= EPS_ORTH
    }

    pub fn is_subspace_of(&self, other: &Subspace) -> bool {
        if self.ambient_dim() != other.ambient_dim() {
            return false;
        }
        if self.is_zero() {
            return true;
        }
        let residual = &self.basis - other.projector() * &self.basis;
        residual.column_iter().all(|c| c.norm() <= EPS_ORTH)
    }

    pub fn is_orthogonal_to(&self, other: &Subspace) -> bool {
        self.ambient_dim() == other.ambient_dim() && self.overlap(other) <= EPS_ORTH
    }

    /// Largest `|⟨e|f⟩|` over the two bases (0 for orthogonal subspaces).
    pub fn overlap(&self, other: &Subspace) -> f64 {
        if self.is_zero() || other.is_zero() {
            return 0.0;
        }
        max_abs(&(self.basis.adjoint() * &other.basis))
    }

    fn check_same_ambient(&self, other: &Subspace) -> Result<()> {
        if self.ambient_dim() != other.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                found: other.ambient_dim(),
            });
        }
        Ok(())
    }

    pub fn join(&self, other: &Subspace) -> Result<Subspace> {
        self.check_same_ambient(other)?;
        let d = self.ambient_dim();
        let mut cols = columns(&self.basis);
        cols.extend(columns(&other.basis));
        Ok(Subspace::from_columns(&stack(d, &cols), EPS_RANK))
    }

    /// Intersection, computed from the principal vectors of the pair: the
    /// eigenvectors of `E† Π_F E` with eigenvalue near 1, kept when their
    /// image in `E` lies in `F`.
    pub fn meet(&self, other: &Subspace) -> Result<Subspace> {
        self.check_same_ambient(other)?;
        let d = self.ambient_dim();
        if self.is_zero() || other.is_zero() {
            return Ok(Subspace::zero(d));
        }
        // Hermitian eigensolver rather than an SVD: nalgebra's complex SVD
        // returned inaccurate left factors on rank-deficient blocks.
        let cross = self.basis.adjoint() * &other.basis;
        let gram = &cross * cross.adjoint();
        let eig = gram.symmetric_eigen();
        let other_projector = other.projector();
        let mut candidates = Vec::new();
        for (i, lambda) in eig.eigenvalues.iter().enumerate() {
            if *lambda < 0.25 {
                continue;
            }
            let v = &self.basis * eig.eigenvectors.column(i);
            let residual = (&v - &other_projector * &v).norm();
            if residual <= EPS_RANK {
                candidates.push(v);
            }
        }
        Ok(Subspace::from_columns(&stack(d, &candidates), EPS_RANK))
    }

    pub fn complement(&self) -> Subspace {
        let d = self.ambient_dim();
        let rest = DMatrix::<C64>::identity(d, d) - self.projector();
        let raw = pivoted_gram_schmidt(columns(&rest), EPS_RANK, d - self.dim());
        Subspace::canonical(d, &raw)
    }
}

impl PartialEq for Subspace {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other)
    }
}

impl fmt::Display for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Subspace(dim {} in ℂ^{})", self.dim(), self.ambient_dim())
    }
}

/// Orthonormal basis for the span of `vectors` at numerical rank `tol`.
pub fn orthonormalize(vectors: &[StateVector], tol: f64) -> Result<Subspace> {
    let Some(first) = vectors.first() else {
        return Err(Error::InvalidArgument(
            "cannot infer the ambient dimension of an empty vector list".into(),
        ));
    };
    let d = first.dim();
    for v in vectors {
        v.check_dim(d)?;
    }
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let cols: Vec<DVector<C64>> = vectors.iter().map(|v| v.0.clone()).collect();
    Ok(Subspace::from_columns(&stack(d, &cols), tol))
}

pub fn project(subspace: &Subspace, psi: &StateVector) -> Result<StateVector> {
    subspace.project(psi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeOp {
    Meet,
    Join,
    Complement,
}

pub fn lattice(op: LatticeOp, e: &Subspace, f: Option<&Subspace>) -> Result<Subspace> {
    let missing = || Error::InvalidArgument("binary lattice operation needs two operands".into());
    match op {
        LatticeOp::Meet => e.meet(f.ok_or_else(missing)?),
        LatticeOp::Join => e.join(f.ok_or_else(missing)?),
        LatticeOp::Complement => Ok(e.complement()),
    }
}

/// A norm-preserving linear map from a domain subspace `E` into `ℂ^d`,
/// stored as a `d × dim(E)` matrix acting on the domain's canonical
/// coordinates.
#[derive(Clone, Debug)]
pub struct PartialIsometryAct {
    domain: Subspace,
    matrix: DMatrix<C64>,
}

impl PartialIsometryAct {
    pub fn new(domain: Subspace, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != domain.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.ambient_dim(),
                found: matrix.nrows(),
            });
        }
        if matrix.ncols() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                found: matrix.ncols(),
            });
        }
        let act = Self { domain, matrix };
        let defect = act.isometry_defect();
        if defect > EPS_ORTH {
            return Err(Error::NotIsometric { defect });
        }
        Ok(act)
    }

    /// Restricts a `d × d` operator to `domain`.
    pub fn from_operator(domain: Subspace, operator: &DMatrix<C64>) -> Result<Self> {
        let d = domain.ambient_dim();
        if operator.nrows() != d || operator.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: operator.nrows(),
            });
        }
        let matrix = operator * domain.basis();
        Self::new(domain, matrix)
    }

    pub fn identity(domain: Subspace) -> Self {
        let matrix = domain.basis().clone();
        Self { domain, matrix }
    }

    pub fn domain(&self) -> &Subspace {
        &self.domain
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn ambient_dim(&self) -> usize {
        self.domain.ambient_dim()
    }

    /// The map extended by zero on the domain's complement (`d × d`).
    pub fn operator(&self) -> DMatrix<C64> {
        &self.matrix * self.domain.basis().adjoint()
    }

    pub fn range(&self) -> Subspace {
        Subspace::from_columns(&self.matrix, EPS_RANK)
    }

    /// Images of the domain's canonical basis vectors.
    pub fn range_vectors(&self) -> Vec<StateVector> {
        self.matrix.column_iter().map(|c| StateVector(c.into_owned())).collect()
    }

    /// `max |M†M − I|`, zero for an exact isometry.
    pub fn isometry_defect(&self) -> f64 {
        let k = self.matrix.ncols();
        if k == 0 {
            return 0.0;
        }
        max_abs(&(self.matrix.adjoint() * &self.matrix - DMatrix::<C64>::identity(k, k)))
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        psi.check_dim(self.ambient_dim())?;
        let residual = self.domain.residual(psi)?;
        if residual > EPS_ORTH * psi.norm().max(1.0) {
            return Err(Error::OutsideDomain { residual });
        }
        Ok(StateVector(&self.matrix * (self.domain.basis().adjoint() * &psi.0)))
    }

    pub fn restrict(&self, sub: &Subspace) -> Result<Self> {
        if sub.ambient_dim() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                found: sub.ambient_dim(),
            });
        }
        if !sub.is_subspace_of(&self.domain) {
            return Err(Error::NotSubevent);
        }
        Self::from_operator(sub.clone(), &self.operator())
    }

    /// `outer ∘ self`; `outer`'s domain must contain the range of `self`.
    pub fn then(&self, outer: &PartialIsometryAct) -> Result<Self> {
        if outer.ambient_dim() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                found: outer.ambient_dim(),
            });
        }
        if !self.range().is_subspace_of(outer.domain()) {
            return Err(Error::DomainMismatch(
                "outer act's domain does not contain the inner act's range".into(),
            ));
        }
        let matrix = outer.operator() * &self.matrix;
        Self::new(self.domain.clone(), matrix)
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        self.domain.approx_eq(&other.domain) && max_abs(&(self.operator() - other.operator())) <= EPS_ORTH
    }

    /// Largest entrywise difference of the two operators on `sub`.
    pub fn disagreement_on(&self, other: &Self, sub: &Subspace) -> f64 {
        let p = sub.projector();
        max_abs(&((self.operator() - other.operator()) * p))
    }
}

pub fn apply_act(act: &PartialIsometryAct, psi: &StateVector) -> Result<StateVector> {
    act.apply(psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn orthonormalize_standard_basis() {
        let s = orthonormalize(
            &[StateVector::from_real(&[1.0, 0.0]), StateVector::from_real(&[0.0, 1.0])],
            1e-9,
        )
        .unwrap();
        assert_eq!(s.dim(), 2);
        assert!(s.approx_eq(&Subspace::full(2)));
    }

    #[test]
    fn orthonormalize_rank_deficient() {
        let s = orthonormalize(
            &[StateVector::from_real(&[1.0, 0.0]), StateVector::from_real(&[2.0, 0.0])],
            1e-9,
        )
        .unwrap();
        assert_eq!(s.dim(), 1);
        let e1 = StateVector::from_real(&[1.0, 0.0]);
        assert!(s.contains(&e1));
    }

    #[test]
    fn orthonormalize_rejects_mixed_dims() {
        let err = orthonormalize(
            &[
                StateVector::from_real(&[1.0, 0.0]),
                StateVector::from_real(&[1.0, 0.0, 0.0]),
            ],
            1e-9,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn projection_onto_coordinate_axis() {
        let e = orthonormalize(&[StateVector::from_real(&[1.0, 0.0])], 1e-9).unwrap();
        let psi = StateVector::new(vec![c(0.3, 0.4), c(-1.0, 2.0)]);
        let p = e.project(&psi).unwrap();
        assert!((p.components()[0] - c(0.3, 0.4)).norm() < 1e-15);
        assert!(p.components()[1].norm() < 1e-15);
    }

    #[test]
    fn projection_onto_zero_subspace() {
        let z = Subspace::zero(3);
        let psi = StateVector::from_real(&[1.0, 2.0, 3.0]);
        assert!(z.project(&psi).unwrap().norm() < 1e-15);
    }

    #[test]
    fn canonical_basis_is_gauge_free() {
        let a = orthonormalize(&[StateVector::new(vec![c(0.0, 1.0), c(0.0, 0.0), c(1.0, 0.0)])], 1e-9).unwrap();
        let b = orthonormalize(&[StateVector::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, -1.0)])], 1e-9).unwrap();
        assert!(a.approx_eq(&b));
        assert!((a.basis() - b.basis()).norm() < 1e-12);
    }

    #[test]
    fn spin_distributivity_fails() {
        let up = orthonormalize(&[StateVector::from_real(&[1.0, 0.0])], 1e-9).unwrap();
        let down = orthonormalize(&[StateVector::from_real(&[0.0, 1.0])], 1e-9).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let right = orthonormalize(&[StateVector::from_real(&[h, h])], 1e-9).unwrap();
        let lhs = up.meet(&right).unwrap().join(&down.meet(&right).unwrap()).unwrap();
        let rhs = up.join(&down).unwrap().meet(&right).unwrap();
        assert!(lhs.is_zero());
        assert!(rhs.approx_eq(&right));
    }

    #[test]
    fn complement_is_involution() {
        let e = orthonormalize(
            &[
                StateVector::from_real(&[1.0, 1.0, 0.0, 0.0]),
                StateVector::from_real(&[0.0, 1.0, 1.0, 2.0]),
            ],
            1e-9,
        )
        .unwrap();
        assert_eq!(e.complement().dim(), 2);
        assert!(e.complement().complement().approx_eq(&e));
        assert!(e.is_orthogonal_to(&e.complement()));
    }

    #[test]
    fn identity_act_is_identity() {
        let e = orthonormalize(&[StateVector::from_real(&[1.0, 0.0, 1.0])], 1e-9).unwrap();
        let u = PartialIsometryAct::identity(e);
        let psi = StateVector::from_real(&[2.0, 0.0, 2.0]);
        assert!(u.apply(&psi).unwrap().distance(&psi) < 1e-12);
    }

    #[test]
    fn relabeling_act_moves_basis_vector() {
        let e1 = orthonormalize(&[StateVector::basis(4, 0)], 1e-9).unwrap();
        let mut m = DMatrix::zeros(4, 1);
        m[(2, 0)] = c(1.0, 0.0);
        let u = PartialIsometryAct::new(e1, m).unwrap();
        let out = u.apply(&StateVector::basis(4, 0)).unwrap();
        assert!(out.distance(&StateVector::basis(4, 2)) < 1e-15);
    }

    #[test]
    fn apply_outside_domain_is_rejected() {
        let e1 = orthonormalize(&[StateVector::basis(2, 0)], 1e-9).unwrap();
        let u = PartialIsometryAct::identity(e1);
        let err = u.apply(&StateVector::from_real(&[1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::OutsideDomain { .. }));
    }

    #[test]
    fn non_isometry_is_rejected() {
        let e1 = orthonormalize(&[StateVector::basis(2, 0)], 1e-9).unwrap();
        let mut m = DMatrix::zeros(2, 1);
        m[(0, 0)] = c(2.0, 0.0);
        assert!(matches!(
            PartialIsometryAct::new(e1, m),
            Err(Error::NotIsometric { .. })
        ));
    }
}
