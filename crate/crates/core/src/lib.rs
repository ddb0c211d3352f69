// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cs_solve;
pub mod dnn;
pub mod error;
pub mod harness;
pub mod legendre;
pub mod lower_sets;
pub mod multiindex;
pub mod quadrature;
pub mod rng;
pub mod targets;

pub use error::{Error, Result};
