//! Intensity estimation for Poisson processes observed under random time
//! warping.
//!
//! Each observed trial is a realization of a Poisson process whose intensity
//! `λ` has been composed with an unknown increasing warp. The estimator builds
//! a kernel density for every trial, takes the Karcher mean of those densities
//! under the phase-separating geometry, and rescales by the maximum likelihood
//! estimate of the total intensity.

// `!(x > 0.0)` is deliberate: it rejects NaN along with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod density_est;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod grid_fn;
pub mod io;
pub mod karcher;
pub mod phase_metrics;
pub mod point_process;
pub mod rng;
pub mod warping;

pub use error::{Error, Result};
pub use grid_fn::{GridFunction, WarpingFunction};
