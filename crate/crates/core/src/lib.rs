//! Cantor sets, piecewise-affine quasiconformal extensions between them,
//! and exact dilatation profiles for checking David-type area bounds.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod analysis;
pub mod cantor;
pub mod error;
pub mod export;
pub mod geometry;
pub mod homeo;
pub mod qcmaps;

pub use error::{QcError, Result};
