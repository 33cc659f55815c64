// `!(a < b)` checks are written that way so NaN falls on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod format;
pub mod geometry;
pub mod maps;
pub mod metrics;
pub mod qh;
pub mod report;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
