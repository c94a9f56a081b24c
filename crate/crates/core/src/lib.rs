//! Contact coverage-guided exploration.
//!
//! State-conditioned contact coverage counters, a learned binary state hash,
//! count-based contact and energy-based reaching rewards, the 2D Push-Box
//! environment and a small PPO trainer. The crate is `no_std` and only needs
//! `alloc`; file formats and the command line live in the `ccge` crate.
#![no_std]
// `!(x > 0.0)` is used on purpose in validation so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod coverage;
pub mod error;
pub mod geometry;
pub mod nn;
pub mod ppo;
pub mod pushbox;
pub mod rewards;
pub mod seed;
pub mod state_hash;
pub mod trainer;
pub mod vector;

pub use error::{Error, Result};
