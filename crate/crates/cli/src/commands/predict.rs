use std::path::Path;

use anyhow::Result;
use skyfade_core::correlation::{CorrelationMode, CorrelationModel};
use skyfade_core::geometry::LinkGeometry;
use skyfade_core::kriging::OrdinaryKriging;
use skyfade_core::propagation::{rsrp_estimate, LinkBudget, SfSample};

use super::{csv_writer, load_model, num};
use crate::config::Config;
use crate::ingest::{ingest_csv, read_measurements};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionRow {
    pub time_s: f64,
    pub w_hat_db: f64,
    pub z_hat_dbm: f64,
    pub kriging_var_db2: f64,
    pub nugget_used: f64,
}

/// Kriges every target from one factorization of the tuning set.
pub fn predict_targets(
    model: &CorrelationModel,
    tuning: &[SfSample],
    targets: &[(f64, LinkGeometry)],
    budget: &LinkBudget,
    mode: CorrelationMode,
) -> Result<Vec<PredictionRow>> {
    let mut ok = OrdinaryKriging::new(tuning, model, mode)?;
    targets
        .iter()
        .map(|(t, g)| {
            let p = ok.predict(g)?;
            Ok(PredictionRow {
                time_s: *t,
                w_hat_db: p.w_db,
                z_hat_dbm: rsrp_estimate(g, budget)? + p.w_db,
                kriging_var_db2: p.variance,
                nugget_used: p.nugget_used,
            })
        })
        .collect()
}

pub fn run(
    model: &Path,
    tuning: &Path,
    targets: &Path,
    out: &Path,
    mode: CorrelationMode,
    config: &Config,
) -> Result<Vec<PredictionRow>> {
    let budget = config.budget()?;
    let model = load_model(model)?;
    let tuning = ingest_csv(tuning, budget, &config.ingest)?.samples;
    let targets: Vec<(f64, LinkGeometry)> = read_measurements(targets, budget, &config.ingest, false)?
        .rows
        .iter()
        .map(|(_, s, g)| (s.time_s, *g))
        .collect();
    let rows = predict_targets(&model, &tuning, &targets, budget, mode)?;
    let mut w = csv_writer(out)?;
    w.write_record(["time_s", "w_hat_db", "z_hat_dbm", "kriging_var_db2", "nugget_used"])?;
    for r in &rows {
        w.write_record([r.time_s, r.w_hat_db, r.z_hat_dbm, r.kriging_var_db2, r.nugget_used].map(num))?;
    }
    w.flush()?;
    Ok(rows)
}
