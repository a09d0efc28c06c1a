//! Movable-antenna hierarchical sub-connected hybrid beamforming for
//! wideband near-field downlink.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analog;
pub mod baselines;
pub mod channel;
pub mod digital;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod layout;
pub mod pipeline;

pub use error::{Error, Result};
