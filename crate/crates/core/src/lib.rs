//! Few-level molecular emitters coupled to a discretized lossy cavity continuum.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod discretize;
pub mod dynamics;
pub mod eigensolve;
pub mod error;
pub mod hamiltonian;
pub mod model;
pub mod observables;
pub mod output;
pub mod presets;
pub mod runner;

pub use error::{Error, Result};
