//! Resource allocation for a rate-splitting (RSMA) LEO satellite downlink that
//! shares spectrum with a GEO system under an interference-temperature cap.
//!
//! The crate is split along the solver pipeline:
//!
//! - [`model`] — dimensions, channel gains, exact SINR/rate expressions and
//!   constraint bookkeeping. Everything downstream is phrased in terms of
//!   these types.
//! - [`surrogate`] — concave log-domain surrogates of the rate function used
//!   by the successive convex approximation (SCA) outer loop.
//! - [`kkt`] — per-slot closed forms derived from the Lagrangian stationarity
//!   conditions: a cubic in the beam power, a quadratic in the private power
//!   splits, and a one-line expression for the common split.
//! - [`assign`] — greedy and random beam/subcarrier assignment.
//! - [`solver`] — the primal-dual orchestration (SCA outer loop, subgradient
//!   inner loop) plus the fixed-power and random-assignment baselines.
//!
//! The core is `no_std`-compatible (with `alloc`); the companion `rsma-sim`
//! crate carries file formats, scenario generation, sweeps and the CLI.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod assign;
pub mod error;
pub mod kkt;
mod math;
pub mod model;
pub mod solver;
pub mod surrogate;

pub use error::Error;
pub use model::{AllocationState, Assignment, ChannelSet, RateReport, SystemConfig};
pub use solver::{solve_fix_p, solve_opt, solve_rand_x, SolveOptions, SolveReport};
