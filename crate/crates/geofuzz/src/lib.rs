//! Directed greybox fuzzing driven by the geometry of execution paths.
//!
//! The crate models a fuzz target as a toy structured program whose executions
//! are paths through its control-flow graph. Observed paths induce an
//! empirical random walk on the graph; hitting probabilities of that walk give
//! a metric between vertices, which lifts to a dissimilarity between paths.
//! Landmark paths discretize path space into cells, and a go-explore loop
//! keeps one elite input per cell, adapts its mutation bandwidth to how easily
//! mutants escape the cell, and allocates mutation power by behavioral
//! entropy. An experiment harness runs seeded campaign grids and aggregates
//! coverage curves.

pub mod diversity;
pub mod error;
pub mod fuzz;
pub mod harness;
pub mod linalg;
pub mod markov;
pub mod objectives;
pub mod path_space;
pub mod toylang;

pub use error::{Error, Result};
