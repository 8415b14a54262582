use thiserror::Error;

use crate::problem::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state lies outside the act's domain (residual {residual:.3e})")]
    OutsideDomain { residual: f64 },

    #[error("operation requires a nonzero subspace")]
    ZeroSubspace,

    #[error("state has zero norm")]
    ZeroState,

    #[error("matrix is not an isometry on its domain (defect {defect:.3e})")]
    NotIsometric { defect: f64 },

    #[error("subspace is not contained in the act's domain")]
    NotSubevent,

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("insufficient dimension: {0}")]
    InsufficientDimension(String),

    #[error("weights must be positive and sum to 1 (sum = {sum})")]
    WeightSumError { sum: f64 },

    #[error("erasure requires equal norms ({left} vs {right})")]
    NormMismatch { left: f64, right: f64 },

    #[error("cannot place images on pairwise-orthogonal targets: {0}")]
    CannotOrthogonalize(String),

    #[error("too many macrostates for lattice enumeration ({count} > {max})")]
    TooManyMacrostates { count: usize, max: usize },

    #[error("oracle is not monotone on standard acts: {0}")]
    NonMonotoneOracle(String),

    #[error("oracle preferences are intransitive: {0}")]
    IntransitiveOracle(String),

    #[error("catalog too large for definitional enumeration ({pairs} pairs > {max})")]
    CatalogTooLarge { pairs: usize, max: usize },

    #[error("cells do not form an equipartition: {0}")]
    NotEquipartition(String),

    #[error("no utility assigned to reward `{0}`")]
    MissingUtility(String),

    #[error("unknown identifier `{0}`")]
    UnknownId(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid decision problem: {0}")]
    InvalidProblem(ValidationReport),
}
