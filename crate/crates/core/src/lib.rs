//! Dynamic ECG lead selection for body-area networks with Neural Thompson Sampling.
//!
//! The crate is organised around one closed loop: a 10-second multi-lead
//! segment arrives ([`signal`]), a single lead-II beat is turned into a
//! context ([`context`]), the neural bandit picks a lead subset ([`bandit`]),
//! a classifier verdict on that subset yields the reward ([`classifier`],
//! [`harness`]) and the transmission/compute cost is charged ([`energy`]).
//!
//! Data-parallel batch work (context extraction, verdict tables, seed sweeps,
//! kernel rank-one updates) goes through [`exec::Execution`], which uses rayon
//! when the `parallel` feature is enabled and runs sequentially otherwise.

pub mod bandit;
pub mod classifier;
pub mod context;
pub mod energy;
pub mod error;
pub mod exec;
pub mod harness;
pub mod signal;

pub use error::{Error, Result};
pub use exec::Execution;
