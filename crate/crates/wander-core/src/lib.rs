//! Numerical core for building and certifying entire functions with a
//! wandering Fatou component.
//!
//! Everything here is `no_std` with `alloc`: operations are pure, sequential
//! and deterministic. The companion `wander` crate adds file formats,
//! parallel sweeps and the command line.
#![no_std]
#![forbid(unsafe_code)]
// Builds that link std (tests, or feature unification with std crates)
// shadow `Float` with inherent float methods.
#![allow(unused_imports)]
// Negated comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cert;
pub mod conformal;
pub mod construction;
pub mod dbar;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod fft;
pub mod geometry;
pub mod local;
pub mod logscale;
pub mod lsq;
pub mod schedule;
pub mod subharmonic;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Shorthand constructor.
#[inline]
pub const fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
