//! Lifting operators for lattice Boltzmann models.
//!
//! Maps macroscopic fields (density, momentum) to distribution functions
//! close to the slow manifold, either with the numerical Chapman-Enskog
//! expansion ([`solver`]) or with Constrained Runs on the full state
//! ([`constrained_runs`]). [`harness`] reproduces restriction-lifting error
//! tables for D1Q3 and D2Q5 test problems.

pub mod calculus;
pub mod constrained_runs;
pub mod error;
pub mod expansion;
pub mod harness;
pub mod lattice;
pub mod lbm;
pub mod newton;
pub mod solver;

pub use error::{Error, Result};
