//! Dense complex linear algebra for the density-matrix formalism: matrices,
//! gate embedding over a fixed register order, and Kraus-form superoperators.

mod eig;
mod embed;
pub mod gates;
mod matrix;
mod superop;

use thiserror::Error;

pub use eig::{hermitian_eigen, hermitian_eigenvalues};
pub use embed::embed_gate;
pub use matrix::{partial_trace, unvec_col, vec_col, CMatrix, ONE, ZERO};
pub use superop::{
    DensityMatrix, Superoperator, VectorizedSuperop, KRAUS_DROP_TOL, POSITIVITY_TOL, UNITARY_TOL,
    VEC_DIM_CAP,
};

/// Default per-axis dimension cap (10 qubits).
pub const DEFAULT_DIM_CAP: usize = 1 << 10;
pub const MAX_QUBITS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("dimension {requested} exceeds cap {cap}")]
    DimensionCap { requested: usize, cap: usize },
    #[error("duplicate target qubit {0}")]
    DuplicateTarget(usize),
    #[error("index {index} out of range for {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("matrix is not unitary")]
    NotUnitary,
    #[error("superoperator needs at least one Kraus operator")]
    EmptyKraus,
    #[error("not a density matrix: {0}")]
    NotDensity(String),
}
