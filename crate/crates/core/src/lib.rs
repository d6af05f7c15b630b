//! Batched sparse (BATS) codes: finite-field kernel, rank-distribution
//! analytics, degree-distribution optimization, the outer codec and a
//! packet-level network simulator.
//!
//! The crate is `no_std` and only needs an allocator.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod beta;
pub mod codec;
pub mod degree;
pub mod error;
pub mod evolution;
pub mod gf;
pub mod lp;
pub mod matrix;
pub mod net;
pub mod rank;
pub mod rng;

pub use error::{Error, Result};
pub use gf::{Field, FieldOp};
pub use matrix::FieldMatrix;
pub use rng::RandomStream;
