//! Z2 lattice Higgs model on finite boxes of the hypercubic lattice.
//!
//! Discrete exterior calculus, polymer enumeration, exact partition functions,
//! the high-temperature and cluster expansions of Wilson line expectations,
//! Monte Carlo sampling and decay-rate fits.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod fit;
pub mod gf2;
pub mod lattice;
pub mod mc;
pub mod polymer;

pub use error::{Error, Result};
