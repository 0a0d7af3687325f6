use serde::{Deserialize, Serialize};

use super::bins::{AngleBins, BinAxis};
use super::dedm::{fit_dedm, DedmFit};
use super::empirical::{estimate_elev_profile, estimate_tilt_profile, AngularProfile};
use super::kernel::{fit_piecewise_kernel, KernelTable};
use super::model::CorrelationModel;
use crate::error::{validation, Result};
use crate::propagation::{sf_statistics, SfSample};

/// How angular kernels are assigned to reference bins.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelScope {
    /// One kernel fitted from each reference bin's row.
    #[default]
    PerReference,
    /// One kernel per conditioning bin, fitted from the row of the bin
    /// holding the configured center angle and shared by all reference bins.
    SingleCenter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub bins: AngleBins,
    pub max_lag_m: f64,
    pub n_lags: usize,
    pub min_cell_count: usize,
    pub rho_floor: f64,
    /// Nugget stored in the model, as a fraction of the SF variance.
    pub nugget_factor: f64,
    pub kernel_scope: KernelScope,
    pub tilt_center_deg: f64,
    pub elev_center_deg: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            bins: AngleBins::default(),
            max_lag_m: 300.0,
            n_lags: 30,
            min_cell_count: 30,
            rho_floor: 1e-3,
            nugget_factor: 1e-6,
            kernel_scope: KernelScope::PerReference,
            tilt_center_deg: 0.0,
            elev_center_deg: 20.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n_samples: usize,
    /// Samples whose angles fall outside the bins.
    pub unbinned_samples: usize,
    pub dedm_max_deviation: f64,
    pub absent_tilt_kernels: Vec<(usize, usize)>,
    pub absent_elev_kernels: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOutput {
    pub model: CorrelationModel,
    pub tilt_profile: AngularProfile,
    pub elev_profile: AngularProfile,
    pub dedm: DedmFit,
    pub report: FitReport,
}

/// Estimates SF statistics, the distance model and both angular kernel
/// tables from one dataset.
pub fn fit_correlation_model(sf: &[SfSample], options: &FitOptions) -> Result<FitOutput> {
    options.bins.validate()?;
    if !(options.nugget_factor >= 0.0) {
        return Err(validation("nugget factor must be >= 0"));
    }
    let stats = sf_statistics(sf)?;
    let dedm = fit_dedm(sf, options.max_lag_m, options.n_lags)?;

    let bins = &options.bins;
    let tilt_profile = estimate_tilt_profile(sf, bins, stats.mean, options.min_cell_count)?;
    let elev_profile = estimate_elev_profile(sf, bins, stats.mean, options.min_cell_count)?;

    let tilt_center = bins.tilt.nearest_rep(options.tilt_center_deg);
    let elev_center = bins.elev.nearest_rep(options.elev_center_deg);
    let tilt_kernels = kernels_from_profile(&tilt_profile, &bins.tilt, options, tilt_center)?;
    let elev_kernels = kernels_from_profile(&elev_profile, &bins.elev, options, elev_center)?;

    let mut report = FitReport {
        n_samples: sf.len(),
        unbinned_samples: sf
            .iter()
            .filter(|s| {
                bins.tilt.index_of(s.geometry.delta_deg).is_none() || bins.elev.index_of(s.geometry.theta_deg).is_none()
            })
            .count(),
        dedm_max_deviation: dedm.max_deviation,
        absent_tilt_kernels: tilt_kernels.absent_cells(),
        absent_elev_kernels: elev_kernels.absent_cells(),
        warnings: Vec::new(),
    };
    let (nt, ne) = (bins.tilt.len(), bins.elev.len());
    if report.absent_tilt_kernels.len() == nt * ne {
        report
            .warnings
            .push("no tilt kernel could be estimated; tilt factor is flat".into());
    } else if !report.absent_tilt_kernels.is_empty() {
        report.warnings.push(format!(
            "{} of {} tilt kernels absent (treated as flat)",
            report.absent_tilt_kernels.len(),
            nt * ne
        ));
    }
    if report.absent_elev_kernels.len() == nt * ne {
        report
            .warnings
            .push("no elevation kernel could be estimated; elevation factor is flat".into());
    } else if !report.absent_elev_kernels.is_empty() {
        report.warnings.push(format!(
            "{} of {} elevation kernels absent (treated as flat)",
            report.absent_elev_kernels.len(),
            nt * ne
        ));
    }
    if report.unbinned_samples > 0 {
        report.warnings.push(format!(
            "{} samples fall outside the angle bins and only enter the distance fit",
            report.unbinned_samples
        ));
    }

    let model = CorrelationModel::new(
        stats.mean,
        stats.variance,
        dedm.params,
        bins.clone(),
        tilt_kernels,
        elev_kernels,
        options.nugget_factor * stats.variance,
    )?;
    Ok(FitOutput {
        model,
        tilt_profile,
        elev_profile,
        dedm,
        report,
    })
}

/// Kernel table `(own bin, conditioning bin)` from one profile.
fn kernels_from_profile(
    profile: &AngularProfile,
    own: &BinAxis,
    options: &FitOptions,
    center: usize,
) -> Result<KernelTable> {
    let conds = profile.matrices.len();
    let mut table = KernelTable::empty(own.len(), conds);
    for (c, m) in profile.matrices.iter().enumerate() {
        let row_kernel = |i: usize| -> Result<Option<_>> {
            if m.get(i, i).is_none() {
                return Ok(None);
            }
            let (mut seps, mut rhos, mut inc) = (Vec::new(), Vec::new(), Vec::new());
            for j in (0..own.len()).filter(|&j| j != i) {
                if let Some(rho) = m.get(i, j) {
                    seps.push((own.rep(j) - own.rep(i)).abs());
                    rhos.push(rho);
                    inc.push(own.rep(j) >= own.rep(i));
                }
            }
            if seps.is_empty() {
                return Ok(None);
            }
            fit_piecewise_kernel(&seps, &rhos, &inc, options.rho_floor).map(Some)
        };
        match options.kernel_scope {
            KernelScope::PerReference => {
                for i in 0..own.len() {
                    table.set(i, c, row_kernel(i)?);
                }
            }
            KernelScope::SingleCenter => {
                let k = row_kernel(center)?;
                for i in 0..own.len() {
                    table.set(i, c, k);
                }
            }
        }
    }
    Ok(table)
}
