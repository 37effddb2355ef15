//! Scaling attacks on LiDAR 3D object detectors and the uniform-size
//! (ScAR) training-data defense.
//!
//! The crate is organized bottom-up: [`geometry`] and [`stats`] hold the
//! numerical primitives, [`dataset`] reads and writes KITTI-style frames,
//! [`detector`] abstracts the model under attack, [`attacks`] and
//! [`defense`] produce scale plans, and [`eval`] scores detections.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod cli;
pub mod dataset;
pub mod defense;
pub mod detector;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod plot;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
