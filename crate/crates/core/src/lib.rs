//! Optimal local tests for a maximally entangled state.
//!
//! The crate builds the test operators as dense matrices, evaluates their
//! error probabilities in closed form, checks the closed forms against
//! independent oracles (Haar twirling, classical brute force) and simulates
//! the measurement protocols that realize them.

pub mod classical;
pub mod error;
pub mod group;
pub mod multisource;
pub mod protocol;
pub mod quantum;
pub mod qstate;
pub mod qubit_pair;

pub use error::{Error, Flagged, Result};
