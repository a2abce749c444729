//! Random walks on discrete cylinders `G × Z`, spectral and potential-theoretic
//! quantities of their bases and limit models, and a Monte Carlo verification
//! suite for the local picture of the walk: vacant sets governed by random
//! interlacements at a level given by Brownian local time.
//!
//! Conventions: every edge weight of the example families is 1/2; the
//! cylinder adds vertical edges of weight 1/2, so `w_(y,z) = w_y + 1`. The
//! capacity of `V` is `Σ_{x∈V} P_x[no return to V]·w_x`.

// `!(x > 0.0)` is the NaN-rejecting guard used throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod graph;
pub mod grid;
pub mod linalg;
pub mod potential;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod walk;
pub mod zoo;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
