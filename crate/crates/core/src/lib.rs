//! Time evolution of one-dimensional quantum chains with tensor trains.
//!
//! Three engines share a single two-site TEBD sweep:
//!
//! * **MPS-TEBD** evolves a pure state stored as a matrix product state
//!   ([`mps::TensorTrain`] with physical dimension 2).
//! * **MPDO-TEBD** evolves a density operator stored by its Pauli-basis
//!   coefficients ([`mpdo::Mpdo`], physical dimension 4).
//! * **rTEBD** is MPDO-TEBD in a reweighted Pauli basis
//!   ([`pauli::ReweightScheme`]): every non-identity Pauli factor is scaled by
//!   `γ ≥ 1`, so SVD truncation sacrifices high-weight correlations first.
//!
//! Independent references live in [`oracle`]: dense statevector and
//! density-matrix simulators for short chains and a Gaussian
//! (correlation-matrix) simulator of the same Trotter circuit for free
//! fermions. [`metrics`] turns states into the reported observables, and
//! [`runner`] drives configured experiments and γ sweeps, writing CSV.
//!
//! Conventions used throughout the crate:
//!
//! * Sites are 0-indexed in code. Bond `b` joins sites `b` and `b + 1`.
//! * Local basis index 0 is `|↑⟩` (σᶻ = +1, occupied), index 1 is `|↓⟩`
//!   (σᶻ = −1, empty).
//! * Pauli index order is `(I, X, Y, Z) ↔ (0, 1, 2, 3)`.
//! * Two-site operators are indexed `2·s_left + s_right` (or `4·μ_left +
//!   μ_right` in the Pauli basis).

// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod metrics;
pub mod models;
pub mod mpdo;
pub mod mps;
pub mod oracle;
pub mod pauli;
pub mod runner;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
