//! Dense complex matrices, Hermitian spectra and matrix-free operators.

pub mod eigen;
pub mod matfree;
pub mod matrix;

pub use eigen::{hermitian_eigenvalues, hermiticity_preserving_eigenvalues, hermiticity_preservation_defect, Spectrum};
pub use matfree::{
    hutchinson_moments, hutchinson_normalized_trace_power, Estimate, KronTerm, MatFreeOperator, Shift,
    StructuredShift,
};
pub use matrix::{
    hermiticity_defect, kron, max_dense_dim, ComplexMatrix, HermitianMatrix, DEFAULT_MAX_DENSE_DIM,
    HERMITIAN_TOLERANCE, MAX_DENSE_DIM_ENV,
};
