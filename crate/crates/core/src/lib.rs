//! Conditional (a posteriori) and unconditional (a priori) dynamics of a
//! two-level atom driven by a single-photon wavepacket.
//!
//! The same physics is computed along three independent routes:
//!
//! * closed-form conditional vectors for 0, 1 and 2 photon detections
//!   ([`trajectory`]), assembled into the unconditional state ([`apriori`]);
//! * stochastic integration of the coupled photon-counting filter
//!   ([`filter`]);
//! * a discrete repeated-interactions (collision) model where the field is a
//!   chain of qubits measured one after another ([`collision`]).
//!
//! Output photon statistics (three-outcome POVM, moments, Mandel Q) live in
//! [`povm`]. Everything here is `no_std` with `alloc`; file formats, the CLI
//! and parallel ensembles are provided by the companion `fockfilter` crate.
//!
//! Units: ħ = 1; the atom basis is ordered `(|g⟩, |e⟩)`.

#![no_std]
#![deny(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod apriori;
pub mod collision;
pub mod error;
pub mod filter;
pub mod linalg;
pub mod povm;
pub mod pulse;
pub mod quad;
pub mod rng;
pub mod trajectory;

pub use error::{Error, Result};
pub use linalg::{Ket2, Operator2, Operator4, Tolerances, C64};
pub use pulse::{ModelParams, PulseEnvelope};
pub use trajectory::AtomModel;
