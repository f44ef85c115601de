//! Stochastic simulation of cascade superfluorescence in a cold atomic
//! ensemble using positive-P phase-space equations.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod exact_sum;
pub mod fixtures;
pub mod integrator;
pub mod noise;
pub mod observables;
pub mod reference;
pub mod runner;
pub mod units;

pub use error::{ConfigError, SimError};
