//! Deterministic 2D pursuit simulator: a team of defenders holds an arc
//! formation, agrees on its shape by consensus, and learns to pick shape
//! changes by imitating a receding-horizon PSO expert.

// Indexed loops over parallel fixed-size arrays read clearer than zips, and
// negated comparisons are how bounds checks reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod expert;
pub mod formation;
pub mod learning;
pub mod negotiation;
pub mod selftest;
pub mod sim;
pub mod vec2;
pub mod world;

pub use error::{Error, Result};
pub use vec2::Vec2;
