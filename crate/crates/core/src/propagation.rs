//! Deterministic two-ray received-power estimate and the split of measured
//! RSRP into that estimate plus a shadow-fading residual.
//!
//! All powers are in dBm and gains in dB; the linear field-amplitude domain
//! only appears inside [`two_ray_rsrp`].

use std::io::Read;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::geometry::{LinkGeometry, MeasurementSample, TxSite};

pub const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;

/// Elevation-indexed antenna gain in dBi with linear interpolation between
/// knots. Elevation is the ray direction seen from the antenna, positive
/// above the horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainTable {
    elevation_deg: Vec<f64>,
    gain_dbi: Vec<f64>,
}

impl Default for GainTable {
    fn default() -> Self {
        Self::isotropic()
    }
}

impl GainTable {
    pub fn isotropic() -> Self {
        Self {
            elevation_deg: vec![-90.0, 90.0],
            gain_dbi: vec![0.0, 0.0],
        }
    }

    /// Builds a table from `(elevation deg, gain dBi)` knots. Knots must be
    /// strictly increasing and span `[-90, 90]`.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(validation("gain table needs at least two knots"));
        }
        let (elevation_deg, gain_dbi): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        if elevation_deg.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(validation("gain table elevations must be strictly increasing"));
        }
        if elevation_deg[0] > -90.0 || *elevation_deg.last().unwrap() < 90.0 {
            return Err(validation("gain table must cover [-90, 90] deg"));
        }
        if gain_dbi.iter().chain(&elevation_deg).any(|g| !g.is_finite()) {
            return Err(validation("gain table contains non-finite values"));
        }
        Ok(Self {
            elevation_deg,
            gain_dbi,
        })
    }

    /// Reads a two-column CSV `elevation_deg,gain_dbi` with a header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut points = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(validation(format!(
                    "gain table row {} has fewer than two columns",
                    i + 2
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| validation(format!("gain table row {}: cannot parse {s:?}", i + 2)))
            };
            points.push((parse(&rec[0])?, parse(&rec[1])?));
        }
        Self::new(points)
    }

    pub fn gain_at(&self, elevation_deg: f64) -> f64 {
        let x = &self.elevation_deg;
        let y = &self.gain_dbi;
        if elevation_deg <= x[0] {
            return y[0];
        }
        if elevation_deg >= x[x.len() - 1] {
            return y[y.len() - 1];
        }
        let k = x.partition_point(|&v| v <= elevation_deg);
        // x[k-1] <= e < x[k]
        let (x0, x1, y0, y1) = (x[k - 1], x[k], y[k - 1], y[k]);
        if elevation_deg == x0 {
            return y0;
        }
        y0 + (y1 - y0) * (elevation_deg - x0) / (x1 - x0)
    }
}

/// Link-budget constants for the deterministic term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx: TxSite,
    pub tx_power_dbm: f64,
    pub carrier_hz: f64,
    #[serde(default = "default_reflection")]
    pub reflection: Complex64,
    #[serde(default)]
    pub gain_uav: GainTable,
    #[serde(default)]
    pub gain_tx: GainTable,
}

fn default_reflection() -> Complex64 {
    Complex64::new(-1.0, 0.0)
}

impl LinkBudget {
    pub fn new(tx: TxSite, tx_power_dbm: f64, carrier_hz: f64) -> Self {
        Self {
            tx,
            tx_power_dbm,
            carrier_hz,
            reflection: default_reflection(),
            gain_uav: GainTable::isotropic(),
            gain_tx: GainTable::isotropic(),
        }
    }

    pub fn with_reflection(mut self, reflection: Complex64) -> Self {
        self.reflection = reflection;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.tx.ground.validate()?;
        if !(self.carrier_hz > 0.0) {
            return Err(validation("carrier frequency must be positive"));
        }
        if !(self.reflection.norm() <= 1.0) {
            return Err(validation("|reflection coefficient| must be <= 1"));
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(validation("transmit power must be finite"));
        }
        if !(self.tx.antenna_height_m >= 0.0) {
            return Err(validation("transmitter antenna height must be >= 0"));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT_MPS / self.carrier_hz
    }
}

/// Free-space path loss in dB.
pub fn fspl_db(d3d_m: f64, carrier_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * d3d_m * carrier_hz / SPEED_OF_LIGHT_MPS).log10()
}

/// Two-ray (direct + ground-reflected) received power estimate in dBm.
///
/// Heights are above the flat ground plane. Each ray's gain is the sum of the
/// transmitter gain at its departure elevation and the UAV gain at its arrival
/// elevation (both seen from the respective antenna).
pub fn two_ray_rsrp(geometry: &LinkGeometry, uav_height_m: f64, tx_height_m: f64, budget: &LinkBudget) -> Result<f64> {
    let d_los = geometry.d3d_m;
    if !(d_los > 0.0) {
        return Err(Error::UndefinedGeometry("zero transmitter-UAV distance".into()));
    }
    let d2d = geometry.d2d_m;
    let sum_h = uav_height_m + tx_height_m;
    let d_ref = (d2d * d2d + sum_h * sum_h).sqrt();

    let los_elev = (uav_height_m - tx_height_m).atan2(d2d).to_degrees();
    let ref_elev = -sum_h.atan2(d2d).to_degrees();
    let g_los = budget.gain_tx.gain_at(los_elev) + budget.gain_uav.gain_at(-los_elev);
    let g_ref = budget.gain_tx.gain_at(ref_elev) + budget.gain_uav.gain_at(ref_elev);

    let lambda = budget.wavelength_m();
    let k = 2.0 * std::f64::consts::PI / lambda;
    // Path difference computed without cancellation.
    let extra = (d_ref * d_ref - d_los * d_los) / (d_ref + d_los);

    // Common phase e^{-jk d_los} drops out of the magnitude.
    let direct = Complex64::new(db_to_amplitude(g_los) / d_los, 0.0);
    let reflected = budget.reflection * db_to_amplitude(g_ref) / d_ref * Complex64::from_polar(1.0, -k * extra);
    let field = direct + reflected;

    Ok(budget.tx_power_dbm + 20.0 * (lambda / (4.0 * std::f64::consts::PI)).log10() + 20.0 * field.norm().log10())
}

fn db_to_amplitude(gain_db: f64) -> f64 {
    10f64.powf(gain_db / 20.0)
}

/// A measurement split into deterministic estimate and shadow fading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfSample {
    pub time_s: f64,
    pub geometry: LinkGeometry,
    /// Shadow fading `w = rsrp - pl_est` in dB.
    pub w_db: f64,
    pub rsrp_dbm: f64,
    /// Two-ray received-power estimate in dBm.
    pub pl_est_dbm: f64,
}

/// Two-ray estimate for a geometry located relative to `budget.tx`.
pub fn rsrp_estimate(geometry: &LinkGeometry, budget: &LinkBudget) -> Result<f64> {
    two_ray_rsrp(geometry, geometry.position.up, budget.tx.antenna_height_m, budget)
}

/// `w = z - rsrp_est`, working in the received-power domain.
pub fn decompose_sf(sample: &MeasurementSample, geometry: &LinkGeometry, budget: &LinkBudget) -> Result<SfSample> {
    let pl_est = rsrp_estimate(geometry, budget)?;
    Ok(SfSample {
        time_s: sample.time_s,
        geometry: *geometry,
        w_db: sample.rsrp_dbm - pl_est,
        rsrp_dbm: sample.rsrp_dbm,
        pl_est_dbm: pl_est,
    })
}

/// Sample mean and unbiased sample variance of the shadow fading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfStats {
    pub mean: f64,
    pub variance: f64,
}

pub fn sf_statistics(samples: &[SfSample]) -> Result<SfStats> {
    let w: Vec<f64> = samples.iter().map(|s| s.w_db).collect();
    mean_variance(&w)
}

pub fn mean_variance(values: &[f64]) -> Result<SfStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 samples for variance, got {n}"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok(SfStats {
        mean,
        variance: ss / (n - 1) as f64,
    })
}
