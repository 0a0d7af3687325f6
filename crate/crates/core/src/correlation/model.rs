use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bins::AngleBins;
use super::dedm::{dedm_eval, DedmParams};
use super::kernel::{KernelTable, PiecewiseExpKernel};
use crate::error::{validation, Error, Result};
use crate::geometry::LinkGeometry;

/// Schema version of the JSON model document.
pub const MODEL_VERSION: u32 = 1;

/// Fitted SF statistics plus distance and angular correlation kernels.
///
/// `tilt_kernels` is indexed by `(reference tilt bin, elevation bin)` and
/// `elev_kernels` by `(reference elevation bin, tilt bin)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationModel {
    pub version: u32,
    pub mu: f64,
    pub sigma2: f64,
    pub dedm: DedmParams,
    pub bins: AngleBins,
    pub tilt_kernels: KernelTable,
    pub elev_kernels: KernelTable,
    pub nugget: f64,
}

impl CorrelationModel {
    pub fn new(
        mu: f64,
        sigma2: f64,
        dedm: DedmParams,
        bins: AngleBins,
        tilt_kernels: KernelTable,
        elev_kernels: KernelTable,
        nugget: f64,
    ) -> Result<Self> {
        let m = Self {
            version: MODEL_VERSION,
            mu,
            sigma2,
            dedm,
            bins,
            tilt_kernels,
            elev_kernels,
            nugget,
        };
        m.validate()?;
        Ok(m)
    }

    /// Model with the same tilt kernel and the same elevation kernel in
    /// every cell.
    pub fn uniform(
        mu: f64,
        sigma2: f64,
        dedm: DedmParams,
        bins: AngleBins,
        tilt: PiecewiseExpKernel,
        elev: PiecewiseExpKernel,
        nugget: f64,
    ) -> Result<Self> {
        let (nt, ne) = (bins.tilt.len(), bins.elev.len());
        Self::new(
            mu,
            sigma2,
            dedm,
            bins,
            KernelTable::filled(nt, ne, tilt),
            KernelTable::filled(ne, nt, elev),
            nugget,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                self.version
            )));
        }
        if !self.mu.is_finite() {
            return Err(validation("SF mean must be finite"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(validation("SF variance must be positive"));
        }
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return Err(validation("nugget must be finite and >= 0"));
        }
        self.dedm.validate()?;
        self.bins.validate()?;
        let (nt, ne) = (self.bins.tilt.len(), self.bins.elev.len());
        if self.tilt_kernels.dims() != (nt, ne) {
            return Err(Error::Schema(format!(
                "tilt kernel table is {:?}, bins require {:?}",
                self.tilt_kernels.dims(),
                (nt, ne)
            )));
        }
        if self.elev_kernels.dims() != (ne, nt) {
            return Err(Error::Schema(format!(
                "elevation kernel table is {:?}, bins require {:?}",
                self.elev_kernels.dims(),
                (ne, nt)
            )));
        }
        Ok(())
    }

    fn tilt_bin(&self, delta: f64) -> Result<usize> {
        self.bins
            .tilt
            .index_of(delta)
            .ok_or_else(|| validation(format!("tilt angle {delta} outside all tilt bins")))
    }

    fn elev_bin(&self, theta: f64) -> Result<usize> {
        self.bins
            .elev
            .index_of(theta)
            .ok_or_else(|| validation(format!("elevation angle {theta} outside all elevation bins")))
    }
}

/// Tilt factor for a change of tilt from `delta_i` to `delta_j` at
/// elevation `theta_i`. Absent kernels contribute 1.
pub fn eval_r_tilt(model: &CorrelationModel, delta_i: f64, delta_j: f64, theta_i: f64) -> Result<f64> {
    let t = model.tilt_bin(delta_i)?;
    model.tilt_bin(delta_j)?;
    let e = model.elev_bin(theta_i)?;
    Ok(model.tilt_kernels.get(t, e).map_or(1.0, |k| k.eval(delta_i, delta_j)))
}

/// Elevation factor for a change of elevation from `theta_i` to `theta_j`
/// at tilt `delta_i`. Absent kernels contribute 1.
pub fn eval_r_elev(model: &CorrelationModel, theta_i: f64, theta_j: f64, delta_i: f64) -> Result<f64> {
    let e = model.elev_bin(theta_i)?;
    model.elev_bin(theta_j)?;
    let t = model.tilt_bin(delta_i)?;
    Ok(model.elev_kernels.get(e, t).map_or(1.0, |k| k.eval(theta_i, theta_j)))
}

/// Which correlation terms enter the covariance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMode {
    /// Distance-only DEDM.
    Baseline,
    /// DEDM times tilt and elevation kernels.
    AngleAware,
    /// DEDM times the tilt kernel only.
    TiltOnly,
    /// DEDM times the elevation kernel only.
    ElevOnly,
}

impl CorrelationMode {
    pub const ALL: [CorrelationMode; 4] = [
        CorrelationMode::Baseline,
        CorrelationMode::AngleAware,
        CorrelationMode::TiltOnly,
        CorrelationMode::ElevOnly,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CorrelationMode::Baseline => "baseline",
            CorrelationMode::AngleAware => "angle_aware",
            CorrelationMode::TiltOnly => "tilt_only",
            CorrelationMode::ElevOnly => "elev_only",
        }
    }
}

impl fmt::Display for CorrelationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorrelationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorrelationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| validation(format!("unknown correlation mode {s:?}")))
    }
}

fn angular_raw(model: &CorrelationModel, gi: &LinkGeometry, gj: &LinkGeometry, mode: CorrelationMode) -> Result<f64> {
    let tilt = match mode {
        CorrelationMode::AngleAware | CorrelationMode::TiltOnly => {
            eval_r_tilt(model, gi.delta_deg, gj.delta_deg, gi.theta_deg)?
        }
        _ => 1.0,
    };
    let elev = match mode {
        CorrelationMode::AngleAware | CorrelationMode::ElevOnly => {
            eval_r_elev(model, gi.theta_deg, gj.theta_deg, gi.delta_deg)?
        }
        _ => 1.0,
    };
    Ok(tilt * elev)
}

/// Symmetrized correlation between two samples under `mode`.
pub fn eval_correlation(
    model: &CorrelationModel,
    gi: &LinkGeometry,
    gj: &LinkGeometry,
    mode: CorrelationMode,
) -> Result<f64> {
    let dist = dedm_eval(&model.dedm, gi.horizontal_distance_to(gj));
    if mode == CorrelationMode::Baseline {
        return Ok(dist);
    }
    let ij = angular_raw(model, gi, gj, mode)?;
    let ji = angular_raw(model, gj, gi, mode)?;
    Ok(dist * (ij * ji).sqrt())
}

/// Angle-aware correlation: DEDM times tilt and elevation kernels,
/// symmetrized by the geometric mean of both orderings.
pub fn eval_full_correlation(model: &CorrelationModel, gi: &LinkGeometry, gj: &LinkGeometry) -> Result<f64> {
    eval_correlation(model, gi, gj, CorrelationMode::AngleAware)
}

pub fn serialize_model(model: &CorrelationModel) -> Result<String> {
    model.validate()?;
    Ok(serde_json::to_string_pretty(model)?)
}

pub fn deserialize_model(document: &str) -> Result<CorrelationModel> {
    let value: serde_json::Value = serde_json::from_str(document)?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(MODEL_VERSION) => {}
        Some(v) => {
            return Err(Error::Schema(format!(
                "unsupported model version {v} (expected {MODEL_VERSION})"
            )))
        }
        None => return Err(Error::Schema("missing field `version`".into())),
    }
    let model: CorrelationModel = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::KERNEL_DECAY_CAP_DEG;
    use crate::geometry::Enu;
    use approx::assert_abs_diff_eq;

    fn geom(east: f64, north: f64, theta: f64, delta: f64) -> LinkGeometry {
        LinkGeometry {
            position: Enu::new(east, north, 28.0),
            theta_deg: theta,
            theta_gs_deg: theta - delta,
            delta_deg: delta,
            d2d_m: 1.0,
            d3d_m: 1.0,
        }
    }

    fn model(tilt: PiecewiseExpKernel, elev: PiecewiseExpKernel) -> CorrelationModel {
        CorrelationModel::uniform(
            -2.0,
            30.0,
            DedmParams::new(0.6, 0.05, 0.005).unwrap(),
            AngleBins::default(),
            tilt,
            elev,
            1e-6 * 30.0,
        )
        .unwrap()
    }

    #[test]
    fn tilt_and_elevation_factors() {
        let m = model(
            PiecewiseExpKernel::new(61.5, 20.0).unwrap(),
            PiecewiseExpKernel::new(39.2, 15.0).unwrap(),
        );
        assert_eq!(eval_r_tilt(&m, 4.0, 4.0, 20.0).unwrap(), 1.0);
        assert_abs_diff_eq!(eval_r_tilt(&m, 0.0, 10.0, 20.0).unwrap(), 0.8498, epsilon = 2e-4);
        assert_ne!(
            eval_r_tilt(&m, 0.0, 5.0, 20.0).unwrap(),
            eval_r_tilt(&m, 0.0, -5.0, 20.0).unwrap()
        );
        assert_eq!(eval_r_elev(&m, 33.0, 33.0, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(eval_r_elev(&m, 20.0, 40.0, 0.0).unwrap(), 0.6004, epsilon = 1e-4);

        let capped = model(PiecewiseExpKernel::capped(), PiecewiseExpKernel::capped());
        assert!(eval_r_elev(&capped, 20.0, 20.1, 0.0).unwrap() >= 0.9999999);

        assert!(eval_r_elev(&m, 0.0, 20.0, 0.0).is_err());
        assert!(eval_r_elev(&m, 20.0, 95.0, 0.0).is_err());
        assert!(eval_r_tilt(&m, 0.0, 1.0, -3.0).is_err());
    }

    #[test]
    fn kernels_non_increasing_in_separation() {
        let m = model(
            PiecewiseExpKernel::new(30.0, 12.0).unwrap(),
            PiecewiseExpKernel::new(25.0, 8.0).unwrap(),
        );
        for dir in [-1.0, 1.0] {
            let mut prev_t = 1.0;
            let mut prev_e = 1.0;
            for k in 0..40 {
                let s = dir * k as f64 * 0.5;
                let t = eval_r_tilt(&m, 0.0, s, 20.0).unwrap();
                let e = eval_r_elev(&m, 40.0, 40.0 + s, 0.0).unwrap();
                assert!(t <= prev_t && e <= prev_e);
                prev_t = t;
                prev_e = e;
            }
        }
    }

    #[test]
    fn full_correlation_properties() {
        let m = model(
            PiecewiseExpKernel::new(20.0, 9.0).unwrap(),
            PiecewiseExpKernel::new(15.0, 30.0).unwrap(),
        );
        let a = geom(0.0, 0.0, 12.0, -4.0);
        let b = geom(30.0, 40.0, 35.0, 8.0);
        assert_eq!(eval_full_correlation(&m, &a, &a).unwrap(), 1.0);
        assert_eq!(
            eval_full_correlation(&m, &a, &b).unwrap(),
            eval_full_correlation(&m, &b, &a).unwrap()
        );
        let r = eval_full_correlation(&m, &a, &b).unwrap();
        assert!(r > 0.0 && r < dedm_eval(&m.dedm, 50.0));

        let capped = model(PiecewiseExpKernel::capped(), PiecewiseExpKernel::capped());
        assert_abs_diff_eq!(
            eval_full_correlation(&capped, &a, &b).unwrap(),
            dedm_eval(&capped.dedm, 50.0),
            epsilon = 1e-4
        );
        let flat = model(PiecewiseExpKernel::flat(), PiecewiseExpKernel::flat());
        for mode in CorrelationMode::ALL {
            assert_abs_diff_eq!(
                eval_correlation(&flat, &a, &b, mode).unwrap(),
                dedm_eval(&flat.dedm, 50.0),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn ablation_modes_drop_one_factor() {
        let m = model(PiecewiseExpKernel::symmetric(20.0), PiecewiseExpKernel::symmetric(15.0));
        let a = geom(0.0, 0.0, 20.0, 0.0);
        let b = geom(0.0, 0.0, 40.0, 5.0);
        let tilt = eval_correlation(&m, &a, &b, CorrelationMode::TiltOnly).unwrap();
        let elev = eval_correlation(&m, &a, &b, CorrelationMode::ElevOnly).unwrap();
        let full = eval_correlation(&m, &a, &b, CorrelationMode::AngleAware).unwrap();
        assert_abs_diff_eq!(tilt, (-5.0f64 / 20.0).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(elev, (-20.0f64 / 15.0).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(full, tilt * elev, epsilon = 1e-12);
        assert_eq!(eval_correlation(&m, &a, &b, CorrelationMode::Baseline).unwrap(), 1.0);
    }

    #[test]
    fn absent_kernels_evaluate_flat() {
        let mut m = model(PiecewiseExpKernel::symmetric(20.0), PiecewiseExpKernel::symmetric(15.0));
        m.elev_kernels = KernelTable::empty(4, 5);
        assert_eq!(eval_r_elev(&m, 20.0, 70.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn document_round_trip_and_errors() {
        let mut m = model(PiecewiseExpKernel::new(61.5, 20.0).unwrap(), PiecewiseExpKernel::flat());
        m.tilt_kernels.set(0, 3, None);
        m.elev_kernels
            .set(2, 1, Some(PiecewiseExpKernel::symmetric(KERNEL_DECAY_CAP_DEG)));
        let doc = serialize_model(&m).unwrap();
        let back = deserialize_model(&doc).unwrap();
        assert_eq!(back, m);
        assert!(back.tilt_kernels.get(0, 3).is_none());

        let mut v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        v.as_object_mut().unwrap().remove("sigma2");
        match deserialize_model(&v.to_string()) {
            Err(Error::Schema(msg)) => assert!(msg.contains("sigma2"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }

        let truncated = &doc[..doc.len() / 2];
        assert!(matches!(deserialize_model(truncated), Err(Error::Json(_))));

        let bumped = doc.replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(matches!(deserialize_model(&bumped), Err(Error::Schema(_))));

        let mut v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        v["tilt_kernels"].as_array_mut().unwrap().pop();
        assert!(matches!(deserialize_model(&v.to_string()), Err(Error::Schema(_))));
    }

    #[test]
    fn mode_parsing() {
        for m in CorrelationMode::ALL {
            assert_eq!(m.as_str().parse::<CorrelationMode>().unwrap(), m);
        }
        assert!("nope".parse::<CorrelationMode>().is_err());
    }
}
