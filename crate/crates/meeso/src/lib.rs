//! Multi-objective, surrogate-assisted search over end-to-end learning
//! pipelines.
//!
//! The crate explores candidate pipelines (preprocessing x architecture x
//! optimizer x training budget), ranks them with a learn-to-rank surrogate to
//! avoid expensive evaluations, and maintains a Pareto archive over
//! prediction error and dropout-based predictive uncertainty.

pub mod acquisition;
pub mod cli;
pub mod engine;
pub mod error;
pub mod evaluator;
pub mod logging;
pub mod pareto;
pub mod search_space;
pub mod surrogate;
pub mod types;

mod seeding;

pub use error::{Error, Result};
