//! Continual-learning engine over task streams.
//!
//! Trains a small MLP sequentially across tasks and counters catastrophic
//! forgetting with episodic-memory replay and per-parameter, per-task
//! meta-learned learning rates. Ships the data pipeline (IDX ingestion,
//! per-task pixel permutations, noise injection), the memory stores, the
//! three training strategies, forgetting metrics, and a reproducible
//! experiment runner.

pub mod continuum;
pub mod error;
pub mod memory;
pub mod metrics;
pub mod nn;
pub mod runner;
pub mod strategies;
pub mod synth;

pub use error::{Error, Result};
