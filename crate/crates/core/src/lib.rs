//! Stochastically self-similar random sets.
//!
//! Random iterated function systems, their code trees under the recursive,
//! homogeneous and V-variable models, ε-coding stopping sets, the Moran
//! dimension equation, empirical Assouad-type dimension estimators and the
//! Galton-Watson process driven by ε-coding counts.

pub mod analytic;
pub mod builtin;
pub mod coding;
pub mod config;
pub mod empirical;
pub mod error;
pub mod geometry;
pub mod gw;
pub mod hash;
pub mod parallel;
pub mod regression;
pub mod rifs;
pub mod similarity;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
