//! Maximum-entropy differential dynamic programming with Shannon and
//! Tsallis entropy, including the q-Gaussian exploration policy whose
//! covariance is scaled by the value of the trajectory being optimized.
//!
//! The crate is `no_std`-compatible (with `alloc`); the companion
//! `qddp-bench` crate carries the CLI, config files and experiment output.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod entropy;
pub mod error;
pub mod models;
pub mod qgauss;
pub mod special;
pub mod trajopt;
pub mod tsallis;

pub use error::Error;
