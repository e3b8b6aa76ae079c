//! Reconstruction kernels for cone-beam data of a deforming object.
//!
//! The crate is `no_std` (with `alloc`). File formats, threading and the
//! command line live in the companion `dynct` crate.
#![no_std]
// Negated comparisons deliberately treat NaN as failing the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod branches;
pub mod data;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod math;
pub mod phantom;
pub mod reconstruct;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
