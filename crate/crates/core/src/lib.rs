//! Exclusion process with conductances in a random environment.
//!
//! The crate simulates the nearest-neighbour exclusion dynamics whose bond
//! rates are built from a strictly increasing càdlàg profile `W` and a
//! stationary elliptic coefficient field, assembles the associated discrete
//! operator `∇ᴺAᴺ∇ᴺ_W`, homogenizes it, and measures density-fluctuation
//! fields against an exactly simulated generalized Ornstein-Uhlenbeck limit.
//!
//! Module map:
//!
//! - [`wfunc`]: conductance profiles `W_k` and their lattice increments.
//! - [`env`]: random coefficient fields `a_j(x)` keyed by a counter-based hash.
//! - [`operators`]: assembly, resolvent solves, spectra, ladder norms and
//!   homogenization.
//! - [`dynamics`]: event-driven exclusion simulation and the single-particle walk.
//! - [`fluctuations`]: fluctuation fields, Dynkin martingales, quadratic
//!   variation and Boltzmann-Gibbs statistics.
//! - [`oulimit`]: the limiting Ornstein-Uhlenbeck process and statistical comparison.
//! - [`cli`] and [`config`]: experiment orchestration behind the `fluctlab` binary.
//! - [`acceptance`]: the numerical acceptance criteria, shared by the test
//!   target and `fluctlab accept`.

// `!(x > 0.0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod env;
mod error;
pub mod fluctuations;
pub mod lattice;
pub mod operators;
pub mod oulimit;
pub mod rng;
pub mod stats;
pub mod wfunc;

pub use error::{Error, Result};
pub use lattice::{Lattice, LatticeFunction};
