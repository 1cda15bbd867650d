//! Exact and parallel-replica simulation of stochastic reaction networks, with
//! path-space sensitivity bounds and a truncated master-equation oracle.

pub mod accumulator;
pub mod cli;
pub mod cme;
pub mod error;
pub mod model;
pub mod parrep;
pub mod rng;
pub mod sensitivity;
pub mod ssa;

pub use error::{Error, Interrupted, Result};
