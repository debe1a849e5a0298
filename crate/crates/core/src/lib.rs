//! Numerics for one-frequency quasi-periodic Schrödinger cocycles.
//!
//! The crate is organised bottom-up:
//!
//! - [`arithmetic`]: continued fractions, convergent denominators, Diophantine margins.
//! - [`linalg2`]: SL(2,R) norms, polar angles and overflow-safe orbit products.
//! - [`cocycle`]: potentials, the Schrödinger and rescaled step maps, orbit iteration.
//! - [`lyapunov`]: finite Lyapunov exponents, large-deviation sets, avalanche-principle
//!   checks and doubling extrapolation.
//! - [`angle`]: angle functions `g_n`, critical points, return times, profile types.
//! - [`spectrum`]: uniform-hyperbolicity certificates, IDS, gap edges, resonance
//!   metrics and the β indicator.
//! - [`regularity`]: one-sided Hölder fits of `L(E)`.
//! - [`verification`]: self-contained numeric checks of closed-form identities.

// `!(x > 0.0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod arithmetic;
pub mod cocycle;
pub mod dd;
mod error;
pub mod linalg2;
pub mod lyapunov;
pub mod reduce;
pub mod regularity;
pub mod spectrum;
pub mod verification;

pub use error::{ApCondition, Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
