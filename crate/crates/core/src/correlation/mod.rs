//! Shadow-fading correlation: the distance-based double-exponential model
//! (DEDM), the piecewise-exponential tilt and elevation kernels, the
//! sorted-sample empirical estimators used to learn them, and the combined
//! model used for Kriging.
//!
//! The full correlation between samples `i` and `j` is
//!
//! ```text
//! r_raw(i, j) = R_dist(d2d_ij) * R_tilt(delta_i, delta_j | theta_i) * R_elev(theta_i, theta_j | delta_i)
//! r(i, j)     = sqrt(r_raw(i, j) * r_raw(j, i))
//! ```
//!
//! The raw product conditions on sample `i` and is therefore not symmetric; the
//! geometric mean of both orderings is what enters a covariance matrix.

mod bins;
mod dedm;
mod empirical;
mod fit;
mod kernel;
mod model;

pub use bins::{AngleBins, BinAxis};
pub use dedm::{dedm_eval, empirical_correlogram, fit_dedm, fit_dedm_curve, Correlogram, DedmFit, DedmParams, LagBin};
pub use empirical::{
    balance_resample, empirical_angular_correlation, estimate_elev_profile, estimate_tilt_profile, AngularProfile,
    ProfileAxis, ProfileMatrix,
};
pub use fit::{fit_correlation_model, FitOptions, FitOutput, FitReport, KernelScope};
pub use kernel::{fit_piecewise_kernel, KernelTable, PiecewiseExpKernel, KERNEL_DECAY_CAP_DEG};
pub use model::{
    deserialize_model, eval_correlation, eval_full_correlation, eval_r_elev, eval_r_tilt, serialize_model,
    CorrelationMode, CorrelationModel, MODEL_VERSION,
};
