//! Shortcut-to-adiabaticity state transfer through a Heisenberg spin bus.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only numerics:
//!
//! * [`pulse`] builds the polynomial control profiles, calibrates the free
//!   amplitude against the phase boundary condition and synthesizes the
//!   boundary couplings `J_S(t)`, `J_R(t)`.
//! * [`model`] builds the zero/one-excitation Hamiltonians, the bus spectrum,
//!   the Zeno-subspace effective Hamiltonian, its rotated form and the full
//!   `2^N` spin Hamiltonian used as an oracle.
//! * [`dynamics`] assembles the time-dependent Hamiltonian of a chosen model
//!   from a coupling schedule.
//! * [`propagate`] integrates the Schrödinger and dephasing master equations
//!   on a uniform grid and evaluates the transfer fidelity.
//!
//! Time is measured in units chosen by the caller; the pulse duration `T` is
//! carried explicitly by [`pulse::PulseParameters`].
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dynamics;
pub mod error;
pub mod model;
pub mod propagate;
pub mod pulse;
pub mod quadrature;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
