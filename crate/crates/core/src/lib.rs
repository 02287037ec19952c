//! Typical-rank analysis of real `n × p × m` tensors at the critical
//! format `p = (m-1)(n-1)+1`.
//!
//! The crate counts the real monic divisors of `y^u + 1`, builds the
//! explicit start system whose solutions are those divisors, tracks it to
//! arbitrary targets by homotopy continuation, and certifies whether a
//! tensor has rank exactly `p`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod certifier;
pub mod classifier;
pub mod error;
pub mod io;
pub mod linalg;
pub mod polyfactor;
pub mod random;
pub mod recurrence;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
