//! File formats, parallel ensembles and the batch command line for
//! [`fockfilter_core`].
//!
//! The binary `fockfilter` runs one [`spec::ExperimentSpec`] per call and
//! writes a CSV or JSON table; `fockfilter verify` runs the acceptance
//! checks in [`verify`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod spec;
pub mod verify;

pub use error::{CliError, Result};
pub use spec::{Command, ExperimentSpec};
