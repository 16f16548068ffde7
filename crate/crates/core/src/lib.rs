//! Sparse, interpretable scoring systems for regression targets.
//!
//! Raw tabular data is binarized into named conditions, a k-sparse ridge
//! regression is solved over them (beam search or exact branch-and-bound),
//! and the result is rendered as a score card: a bias plus real-valued points
//! per active condition.

pub mod binarize;
pub mod error;
pub mod eval;
pub mod personalize;
pub mod pipeline;
pub mod ridge;
pub mod scorecard;
pub mod solvers;
pub mod tabular;
pub mod verify;

pub use error::{Error, Result};
