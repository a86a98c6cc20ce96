//! Complex linear algebra over labeled finite-dimensional tensor-product
//! spaces.
//!
//! Every object carries a [`SpaceLayout`]: an ordered list of factors, each
//! with a label and a list of outcome labels. Amplitudes are stored densely,
//! row-major over the mixed-radix index defined by factor order (the first
//! factor varies slowest), so `tensor` is the plain Kronecker product.
//!
//! Conventions fixed here and relied on everywhere else:
//!
//! - [`inner`] is conjugate-linear in the **first** argument and linear in the
//!   second: `inner(a·x, b·y) = conj(a)·b·inner(x, y)`.
//! - Structural checks (orthonormality, unitarity, hermiticity, unit norm)
//!   use [`STRUCTURAL_TOL`] = 1e-9.
//! - States are compared "up to phase" by aligning the global phase with the
//!   overlap of the two vectors; see [`StateVector::phase_aligned_diff`].

mod basis;
mod layout;
mod operator;
mod state;

pub use basis::{
    expand_in_basis, lift_basis, lift_decomposition, DecompositionBlock, OrthonormalBasis,
    SubspaceDecomposition,
};
pub use layout::{Factor, SpaceLayout, DEFAULT_DIM_CAP};
pub use operator::{apply_unitary, is_product, ProductCheck, SelfAdjointOperator, UnitaryMap};
pub use state::{inner, tensor, StateVector};

pub use num_complex::Complex64;

pub(crate) use layout::SubsetMap;

use thiserror::Error;

/// Tolerance for structural invariants: orthonormality, unitarity,
/// hermiticity, unit-norm flags and distribution sums.
pub const STRUCTURAL_TOL: f64 = 1e-9;

/// Probabilities in `[-PROB_DUST, 0)` are rounding dust and clamp to zero;
/// anything below `-PROB_DUST` is an internal-consistency error.
pub const PROB_DUST: f64 = 1e-12;

/// Absolute gap used to cluster eigenvalues of a self-adjoint operator.
pub const EIGEN_CLUSTER_TOL: f64 = 1e-6;

/// Relative singular-value threshold deciding numerical rank one.
pub const RANK_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("duplicate factor label `{0}`")]
    DuplicateFactor(String),
    #[error("unknown factor label `{0}`")]
    UnknownFactor(String),
    #[error("duplicate outcome label `{0}`")]
    DuplicateOutcome(String),
    #[error("unknown outcome label `{0}`")]
    UnknownOutcome(String),
    #[error("total dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("non-finite amplitude at index {0}")]
    NonFinite(usize),
    #[error("expected {want} amplitudes, got {got}")]
    LengthMismatch { got: usize, want: usize },
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("vectors are not orthonormal: {0}")]
    NotOrthonormal(String),
    #[error("basis is incomplete ({got} of {want} vectors)")]
    IncompleteBasis { got: usize, want: usize },
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("matrix is not self-adjoint (max deviation {0:.3e})")]
    NotSelfAdjoint(f64),
    #[error("outcome `{0}` has probability below 1e-12; conditioning on an impossible event")]
    ZeroProbabilityOutcome(String),
    #[error("state carries weight {0:.3e} outside the measured subspace")]
    UnmeasuredSupport(f64),
    #[error("no eigenvalue of the operator lies within {tol:.1e} of {value}")]
    NoEigenvalueCluster { value: f64, tol: f64 },
    #[error("invalid factor split: {0}")]
    InvalidSplit(String),
    #[error("index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("internal consistency violation: {0}")]
    Internal(String),
}

pub type CoreResult<T> = Result<T, CoreError>;
