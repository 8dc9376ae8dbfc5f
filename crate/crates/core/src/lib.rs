//! Higher-order function networks.
//!
//! An encoder emits the full parameter vector of a small mapping network per
//! observation; the mapping network reconstructs a point set by transforming
//! samples drawn from a canonical set such as the unit ball.

pub mod composition;
pub mod error;
pub mod funcnets;
pub mod geometry;
pub mod planning;
pub mod seeding;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
