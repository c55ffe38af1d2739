//! Mesh-size limits of the reaction-diffusion master equation.
//!
//! Exact and simulated mean association times for a single A + B pair on a
//! Cartesian voxel lattice, the mesh-dependent association-rate models that
//! try to match Smoluchowski kinetics, and the critical voxel size below
//! which no local rate can.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fpt_exact;
pub mod fpt_mc;
pub mod harness;
mod linalg;
pub mod micro;
pub mod model;
pub mod rates;
pub mod stats;

pub use error::{Error, Result};
