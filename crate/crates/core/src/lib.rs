//! Multi-aspect preference and intent modeling for multi-behavior
//! sequential recommendation.
//!
//! The crate is `no_std` and only needs `alloc`. It carries the dense
//! tensor/tape substrate, dataset preprocessing over in-memory records, the
//! recommender network with its ablation variants, the training loop and the
//! leave-one-out ranking evaluation. File formats, parsing of raw logs,
//! statistics that need special functions and the command-line interface
//! live in the `maint` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod training;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
