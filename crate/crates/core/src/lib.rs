//! Lagrangian (quantile) JKO scheme for the one-dimensional porous medium
//! equation with spatially varying convection, together with an independent
//! finite-volume reference solver and a numerical entropy-inequality check.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod entropycheck;
pub mod error;
pub mod jko;
pub mod measure1d;
pub mod numerics;
pub mod profiles;
pub mod refsolver;
pub mod transform;

pub use error::{Error, Result};
