// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contour;
pub mod error;
pub mod gibbs;
pub mod lab;
pub mod numeric;
pub mod par;
pub mod potential;
pub mod rng;
pub mod statkit;
pub mod wigner;

pub use error::{Result, SskError};
