//! Shadow-fading correlation modeling for UAV air-to-ground links.
//!
//! The crate splits a received-power measurement into a deterministic two-ray
//! term and a shadow-fading residual, learns a correlation model that couples
//! horizontal distance with the UAV elevation and tilt angles, and uses that
//! model inside ordinary Kriging to predict received power at unmeasured poses.
//!
//! Modules, bottom-up:
//!
//! - [`geometry`]: local ENU projection, elevation and body-frame tilt angles.
//! - [`propagation`]: two-ray received-power estimate and SF decomposition.
//! - [`correlation`]: distance (DEDM) and angular kernels, empirical estimators,
//!   model fitting and the JSON model document.
//! - [`kriging`]: ordinary Kriging under the baseline or angle-aware correlation.
//! - [`fieldsim`]: synthetic flights and correlated SF fields with known truth.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlation;
pub mod error;
pub mod fieldsim;
pub mod geometry;
pub mod kriging;
pub mod propagation;
mod serde_util;

pub use error::{Error, Result};
