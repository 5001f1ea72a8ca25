//! Extremal index estimation over a continuum of thresholds.
//!
//! The crate is organised around the blocks estimator of the extremal index
//! θ evaluated at every threshold `X_{n-⌈k t⌉:n}`, `t ∈ (0,1]`, and a
//! bias-corrected combination of those estimates under a finite signed
//! measure on `(0,1]²` whose product push-forward vanishes.
//!
//! - [`sim`]: seeded generators for AR(1)-Cauchy, random repetition,
//!   moving maxima and iid series.
//! - [`estimate`]: blocks and runs estimators, threshold sweeps.
//! - [`clusterproc`]: standardized excesses, cluster functionals and the
//!   empirical cluster process, covariance kernels.
//! - [`biascorrect`]: signed measures and the bias-corrected estimator.
//! - [`oracle`]: closed-form finite-sample quantities for the model
//!   families that have them.
//!
//! Everything here is pure and `no_std` (with `alloc`); file formats, the
//! experiment harness and the command line live in the `exindex` crate.

#![no_std]
// `!(x > y)` is used on purpose so that NaN fails parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod biascorrect;
pub mod clusterproc;
pub mod dist;
pub mod error;
pub mod estimate;
pub mod oracle;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
