//! Pseudo-spectral simulator for the 2D stochastic quasi-geostrophic equation
//! with fractional dissipation on the periodic torus,
//!
//! ```text
//! dθ + κ(-Δ)^α θ dt + u·∇θ dt = G(θ) dW,    u = R^⊥θ,
//! ```
//!
//! together with the estimators used to check its moment, energy and
//! synchronization bounds numerically.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod integrate;
pub mod noise;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use spectral::{Grid, GridSpec, SpectralField};
