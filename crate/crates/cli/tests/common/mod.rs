#![allow(dead_code)]

use std::path::{Path, PathBuf};

use skyfade::Config;
use skyfade_core::correlation::{AngleBins, CorrelationModel, DedmParams, PiecewiseExpKernel};
use skyfade_core::fieldsim::{FlightPattern, FlightSpec, SfGenerator, SimConfig};
use skyfade_core::geometry::{Geodetic, TxSite};
use skyfade_core::propagation::LinkBudget;

pub fn budget() -> LinkBudget {
    let tx = TxSite::new(Geodetic::new(35.727, -78.696, 0.0).unwrap(), 1.5);
    LinkBudget::new(tx, 20.0, 3.32e9)
}

pub fn model(dedm: DedmParams, tilt: PiecewiseExpKernel, elev: PiecewiseExpKernel, nugget: f64) -> CorrelationModel {
    CorrelationModel::uniform(-4.0, 25.0, dedm, AngleBins::default(), tilt, elev, nugget).unwrap()
}

pub fn capped_model(nugget: f64) -> CorrelationModel {
    model(
        DedmParams::new(0.6, 0.05, 0.005).unwrap(),
        PiecewiseExpKernel::capped(),
        PiecewiseExpKernel::capped(),
        nugget,
    )
}

pub fn sim(seed: u64, n: usize, truth: CorrelationModel, generator: SfGenerator, flight: FlightSpec) -> SimConfig {
    SimConfig {
        seed,
        n_samples: n,
        flight,
        truth,
        budget: budget(),
        noise_std_db: 0.0,
        generator,
    }
}

/// Tilt 0 -> 10 deg correlates at 0.85 and elevation 20 -> 40 deg at 0.60.
/// Tilt dependence at 70 deg is weak so every cell shift stays below 90 deg.
pub fn shift_truth() -> CorrelationModel {
    let mut t = model(
        DedmParams::new(0.5, 5.0, 1.0).unwrap(),
        PiecewiseExpKernel::symmetric(-10.0 / 0.85f64.ln()),
        PiecewiseExpKernel::symmetric(-20.0 / 0.6f64.ln()),
        0.0,
    );
    for t_bin in 0..5 {
        t.tilt_kernels.set(t_bin, 3, Some(PiecewiseExpKernel::symmetric(400.0)));
    }
    t
}

/// 2000 random-waypoint samples 25..75 m east of the mast with 40% level
/// attitude holds, under the cell-shift generator.
pub fn shift_sim(seed: u64) -> SimConfig {
    let flight = FlightSpec {
        pattern: FlightPattern::RandomWaypoint,
        east_m: [25.0, 75.0],
        north_m: [-60.0, 60.0],
        level_fraction: 0.4,
        pitch_amplitude_deg: 16.0,
        roll_amplitude_deg: 16.0,
        trajectory_seed: seed,
        ..FlightSpec::default()
    };
    let generator = SfGenerator::AngularShift {
        tilt_ref_deg: 0.0,
        elev_ref_deg: 20.0,
    };
    sim(seed, 2000, shift_truth(), generator, flight)
}

pub fn shift_config(seed: u64) -> Config {
    let mut c = config_with(shift_sim(seed));
    c.fit.max_lag_m = 60.0;
    c.fit.n_lags = 20;
    c
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    0.5 * (v[(n - 1) / 2] + v[n / 2])
}

pub fn config_with(sim: SimConfig) -> Config {
    Config {
        budget: Some(sim.budget.clone()),
        sim: Some(sim),
        ..Config::default()
    }
}

pub fn path(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

/// Rows of a CSV file as maps from header to field.
pub fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (headers, rows)
}

pub fn column(path: &Path, name: &str) -> Vec<f64> {
    let (h, rows) = rows(path);
    let k = h
        .iter()
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}
