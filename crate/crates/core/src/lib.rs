//! Randomized sketching for least squares, including the iterative Hessian
//! sketch for constrained problems.

pub mod error;
pub mod linalg;
pub mod rng;
pub mod sketch;
pub mod constraints;
pub mod subsolver;
pub mod ihs;
pub mod experiments;

pub use error::{Error, Result};
