//! Deterministic closed-loop control pipeline for a single simulated joint.
//!
//! The crate is `no_std` (it needs `alloc`) and carries the whole sense →
//! normalize → decide → actuate → step → reward → adapt loop:
//!
//! - [`sensing`]: noisy sensor frames, warm-up calibration and min-max scaling
//! - [`network`]: the feed-forward decision network, softmax and argmax
//! - [`controller`]: PD torque law and the discrete action table
//! - [`plant`]: rigid-joint dynamics, fault effects and energy bookkeeping
//! - [`learning`]: rewards, discounted returns, backpropagation and SGD
//! - [`gradcheck`]: finite-difference verification of the analytic gradients
//! - [`harness`]: scenario configs, episodes, metrics and paired comparisons
//!
//! File formats, export and the command-line front end live in the
//! `loopforge` crate.

#![no_std]
#![allow(clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod controller;
mod error;
pub mod gradcheck;
pub mod harness;
pub mod learning;
pub mod network;
pub mod plant;
pub mod rng;
pub mod sensing;

pub use error::{Error, Result};
