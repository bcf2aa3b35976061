//! Off-policy evaluation for slate (ranking) policies.

pub mod error;
pub mod estimators;
pub mod harness;
pub mod policy;
pub mod regression;
pub mod rng;
pub mod synth;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
