//! Approximate dynamic programming for convex switching systems.
//!
//! Value functions of a finite-horizon control problem with a finite
//! controlled component and linear uncontrolled dynamics are approximated
//! by piecewise linear convex functions held as matrix representatives on a
//! grid ([`pwc`], [`solver`]). The resulting policy is assessed by primal
//! and dual Monte Carlo bounds ([`diagnostics`]). The battery storage and
//! forward trading model in [`battery`] instantiates the framework, and
//! [`config`]/[`experiment`] wire everything to files and the `cswitch`
//! command line tool.

pub mod battery;
pub mod bundle;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod pwc;
pub mod report;
pub mod solver;
pub mod stochastic;

pub use error::{Error, Result};
