//! Simulator for localization attacks on type-I codebook precoder feedback.

pub mod analysis;
pub mod attack;
pub mod baselines;
pub mod channel;
pub mod codebook;
pub mod error;
pub mod geometry;
pub mod rng;
pub mod runner;
pub mod scenario;
pub mod stats;

pub use error::{Error, Result};
