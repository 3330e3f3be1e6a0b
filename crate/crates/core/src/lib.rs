//! Multi-objective normal-form game simulator with opponent-modelling and
//! opponent-shaping learners.

// Index loops read closer to the maths; `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod critic;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod gp;
pub mod harness;
pub mod learners;
pub mod opponent;
pub mod policy;

pub use error::{Error, Result};
