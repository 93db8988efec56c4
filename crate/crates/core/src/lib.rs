//! Numerical laboratory for three-dimensional Einstein-Weyl geometry and the
//! SU(∞) Toda field equation.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod charts;
pub mod report;
pub mod error;
pub mod toda;
pub mod ward;
pub mod weylgeom;

pub use error::{Error, Result};
