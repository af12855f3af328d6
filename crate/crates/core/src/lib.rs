//! Median bias-reduced estimation via modified score equations.

pub mod adjust;
pub mod datasets;
pub mod error;
pub mod exact;
pub mod model;
pub mod models;
pub mod numerics;
pub mod sim;
pub mod solve;

pub use error::{Error, Result};
