//! Simulation and analysis of phase gates on planar ion Wigner crystals.
//!
//! The crate models a rotating two-dimensional ion crystal in a Penning trap
//! as a register of qubits coupled by shared phonon modes. State-dependent
//! optical push forces drive those modes; when a drive returns the modes to
//! their initial state it leaves behind qubit-dependent geometric phases,
//! which is the entangling resource. Modules:
//!
//! - [`crystal`]: equilibrium structure of the crystal.
//! - [`phonons`]: normal modes, mode lengths, thermal occupations.
//! - [`gatesim`]: driven-mode dynamics, accumulated two-qubit phases,
//!   thermal gate fidelity, and an independent truncated-Fock cross-check.
//! - [`cluster`]: weighted-graph-state generation with a rotating-wall beam
//!   sweep and the resulting edge-weight pattern.
//! - [`network`]: photonic links between a crystal memory and a processor,
//!   with asymmetric collection efficiencies.
//! - [`io`]: CSV/JSON artifact writers and run configuration loading.
//! - [`cli`]: the `wigner-push` command-line front end.
//!
//! All public interfaces use SI units (meters, seconds, kilograms, radians
//! per second for angular frequencies); scaled units are internal.

// Validators use negated float comparisons so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cluster;
pub mod crystal;
pub mod error;
pub mod gatesim;
pub mod io;
pub mod network;
pub mod phonons;
pub mod units;

pub use error::{Error, Result};
