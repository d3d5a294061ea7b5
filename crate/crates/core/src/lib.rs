//! Toolkit for variational quantum eigensolvers on a dense state-vector
//! simulator: Pauli and fermion algebra, ansatz preparation, adiabatic
//! schedules, shot-based Hamiltonian averaging, accuracy bounds and
//! derivative-free optimization.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod fermion;
pub mod optimize;
pub mod pauli;
pub mod rng;
pub mod schedule;
pub mod simulator;

pub use error::{Error, Result};
pub use fermion::{FermionOperator, IntegralSet, LadderOp, RdmPair};
pub use pauli::{PauliString, PauliSum, PauliTerm};
pub use schedule::Schedule;
pub use simulator::StateVector;

/// Formats a float with 17 significant digits, enough to round-trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
