#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod pli;
pub mod wmmse;
pub mod wmmse_ts;

pub use error::{Error, Result};
