//! Spectra of random quantum channels whose Kraus operators are random
//! Hermitian matrices.
//!
//! The crate has two independent halves that meet in [`stats`]:
//!
//! * a simulation path: seeded random-matrix samplers ([`ensembles`]), the
//!   channel matrix `M = Σ K_i ⊗ conj(K_i)` and its centered, rescaled form
//!   `Δ = d^{-1/2} Σ (W_i ⊗ conj(W_i) − E[W_i ⊗ conj(W_i)])` ([`channel`]), and
//!   dense or matrix-free spectral computations ([`linalg`]);
//! * a prediction path: exact limiting moments from noncrossing-partition
//!   combinatorics and the limiting densities ([`free_moments`]).
//!
//! [`experiment`] wires both into reproducible runs with CSV/JSON outputs;
//! the `kraus-spectra` binary is a thin command-line wrapper around it.

pub mod channel;
pub mod ensembles;
pub mod error;
pub mod experiment;
pub mod free_moments;
pub mod linalg;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
