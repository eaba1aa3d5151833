#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod action_angle;
pub mod criteria;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod model;
pub mod numerics;
pub mod poincare;

pub use error::{Error, Result};
