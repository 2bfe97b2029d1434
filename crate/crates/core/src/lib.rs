//! Degenerate elliptic equations `f(|∇u|, -∇²u) = b(·, u, |∇u|)` on
//! geodesically convex caps of the unit sphere, together with numerical
//! checks of the ingredients of the two-point concavity maximum principle.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cap;
pub mod config;
pub mod error;
pub mod field;
pub mod geometry;
pub mod jacobi;
pub mod lemmas;
pub mod operators;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
