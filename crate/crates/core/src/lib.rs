//! Exact diagonalization of the Z2 lattice gauge model in its composite-fermion form,
//! with closed and Lindblad dynamics averaged over charge sectors.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fock;
pub mod gauge;
pub mod linalg;
pub mod lindblad;
pub mod observables;
pub mod sectors;
pub mod sparse;

pub use error::{Error, Result};
pub use fock::{OccupationState, SectorBasis};
pub use gauge::{Boundary, ChargeConfig, ModelParams};
pub use lindblad::{DensityMatrix, DissipationSpec, Lindbladian, Method, PropagatorParams};
pub use sectors::{EnsembleParams, SectorMode};
pub use sparse::SparseOperator;
