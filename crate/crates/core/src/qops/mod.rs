//! Dense complex linear algebra and quantum-state primitives.

mod linalg;
mod matrix;
pub mod random;
mod state;

pub use linalg::{
    eig_hermitian, expectation, min_eigenvalue, operator_schmidt_spectrum, partial_trace,
    partial_transpose, permute_qubits, realign, schmidt_rank, HermitianEigen, EIG_HERMITIAN_TOL,
};
pub(crate) use linalg::trace_product;
pub use matrix::{c, ComplexMatrix, C64};
pub use state::{
    bell_projector, bell_vector, euler_zyz, BellState, DensityOperator, LocalUnitary,
    OutcomeString, STRUCTURAL_TOL,
};
