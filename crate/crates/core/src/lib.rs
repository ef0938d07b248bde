#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod error;
pub mod fixpoint;
mod float;
pub mod goalspace;
pub mod metagoal;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
