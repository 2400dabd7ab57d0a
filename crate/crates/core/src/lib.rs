// Negated comparisons such as `!(a <= b)` are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkers;
pub mod corrections;
pub mod error;
pub mod graph;
pub mod metric;
mod par;
pub mod sobolev;
pub mod spectral;
pub mod tolerances;

pub use error::{Error, Result};
pub mod pipeline;
