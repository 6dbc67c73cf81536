//! Propagation of quantum states of light through absorbing and amplifying
//! four-port devices (lossy fibers, beam splitters, linear amplifiers), and
//! the entanglement left in the output.
//!
//! Two engines are provided: a truncated Fock-space engine that dilates each
//! device to a unitary on field ⊗ device ([`fourport`]), and a Gaussian
//! moment engine for squeezed states ([`gaussian`]). [`entanglement`]
//! quantifies the result and [`experiments`] drives the parameter sweeps used
//! by the command-line tool.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entanglement;
pub mod error;
pub mod experiments;
pub mod fock_space;
pub mod fourport;
pub mod gaussian;
pub mod linalg;
pub mod optim;
pub mod par;

pub use error::{Error, Result};
