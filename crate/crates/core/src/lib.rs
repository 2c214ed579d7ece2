//! Design-space exploration for discrete quantum gate sets.
//!
//! Targets are decomposed into circuits over candidate gate sets, gate sets
//! are scored against a reference with a weighted multi-metric cost, and
//! parametric gate sets are searched for ones that score higher.

pub mod error;
pub mod matcore;

pub use error::{Error, Result};
pub mod gatelib;
pub mod decomp;
pub mod datasets;
pub mod evaluate;
pub mod discover;
pub mod run;
