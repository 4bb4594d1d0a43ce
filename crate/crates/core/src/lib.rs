//! Numerical laboratory for the entropy photon-number inequality (EPnI).
//!
//! The crate builds states on a truncated Fock space, couples modes through
//! lossless beam splitters, evaluates entropy functionals and runs seeded
//! campaigns and searches that probe the EPnI, its classical counterpart and
//! the two minimum-output-entropy conjectures that follow from it. Closed-form
//! bosonic channel capacities live in [`capacity`].
//!
//! Index convention: a multi-mode basis state `|n_0, n_1, ...>` has flat index
//! `n_0 * (d_1 * d_2 * ...) + n_1 * (d_2 * ...) + ...`, i.e. mode 0 is the most
//! significant digit, matching the Kronecker product order.

pub mod capacity;
pub mod classical;
pub mod entropy;
mod error;
pub mod fock;
pub mod harness;
pub mod linalg;
pub mod optics;
pub mod quadrature;

pub use error::{Error, Result};
pub use fock::{DensityOperator, PureState, StateDiagnostics};
pub use linalg::{CMatrix, CVector, C64};
