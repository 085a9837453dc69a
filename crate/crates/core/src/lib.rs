//! Scenario-tree models of hydropower dam scheduling under partial
//! information, with the primal LP, its conjugate dual, closed-form dual
//! certificates and a verification harness tying them together.

pub mod analysis;
pub mod certificates;
pub mod dual;
pub mod error;
pub mod generate;
pub mod lagrange;
pub mod model;
pub mod primal;
pub mod tree;

pub use error::{HydroError, Result, TreeError};
