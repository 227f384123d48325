//! Active-learning queue prioritization for generative candidate streams.
//!
//! A generator streams candidates into a queue; an ensemble surrogate ranks
//! the queue so a fixed pool of expensive oracle workers evaluates the most
//! promising candidates first.

pub mod acquisition;
pub mod dataset;
pub mod domain;
pub mod engine;
pub mod error;
pub mod harness;
pub mod rng;
pub mod surrogate;

pub use error::{Error, Result};
