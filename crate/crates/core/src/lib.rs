//! Integrated Brownian motion toolkit: the harmonic function h of the process killed at
//! zero, passage-time laws, penalization martingales, and Monte Carlo verification.

// NaN-rejecting guards read `!(x > 0.0)`; oracle constants keep every printed digit.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod error;
pub mod ibm_core;
pub mod mc_engine;
pub mod specfun;
pub mod verify_harness;

pub use error::{Error, Result};
