//! Numerical toolkit for signature-type-changing metrics.
//!
//! A metric `g̃ = g + f V♭⊗V♭` built from a Lorentzian metric `g`, a unit
//! timelike line element field `V` and a scalar `f` is Lorentzian where
//! `f < 1`, Riemannian where `f > 1`, and degenerate on the hypersurface
//! `H = f⁻¹(1)`. This crate builds such metrics, recovers `(g, V, f)` from a
//! given `g̃`, locates `H`, and checks the structure of the radical and of
//! the induced metric at sampled points.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod dual;
pub mod error;
pub mod expr;
pub mod gallery;
pub mod geometry;
pub mod hypersurface;
pub mod transform;

pub use dual::Dual;
pub use error::{Error, Result};
pub use expr::{Expression, ParseError};
