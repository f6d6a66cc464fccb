//! Resource-limited attacks on networked control loops.

// NaN must fail the positivity checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod error;
pub mod numerics;
pub mod safety;
pub mod scenario;
pub mod sim;
pub mod system;

pub use error::{Error, Result};
