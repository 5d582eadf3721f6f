//! Numerical kernel for planar differential inclusions `Du ∈ Π`, where `Π` is a
//! C² curve in the space of real 2×2 matrices.
//!
//! The crate certifies curve hypotheses (ellipticity class, quartic
//! nondegeneracy, absence of rank-one connections), factors the rank-one
//! tangent `cof γ' = λ̂ ⊗ Ψ̂`, builds entropy families, synthesizes exact
//! solution fields and measures weak residuals, Besov seminorms and
//! commutator decay on gridded fields.
//!
//! The crate is `no_std` with `alloc`. Enable either the default `std`
//! feature or `libm` for floating point functions.

#![no_std]
#![forbid(unsafe_code)]
#![warn(missing_debug_implementations)]
// `!(x > y)` guards are written that way so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("diffinc-core requires either the `std` or the `libm` feature");

mod error;
mod numerics;

pub mod certify;
pub mod curve;
pub mod entropy;
pub mod factorize;
pub mod field;
pub mod mat2;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Crate version, embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
