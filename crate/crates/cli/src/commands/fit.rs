use std::path::Path;

use anyhow::Result;
use log::warn;
use serde::Serialize;
use skyfade_core::correlation::{
    dedm_eval, fit_correlation_model, serialize_model, AngularProfile, BinAxis, DedmFit, FitOutput, FitReport,
};

use super::{csv_writer, num, opt, sidecar, write_json, write_text};
use crate::config::Config;
use crate::ingest::{ingest_csv, SkippedRow};

#[derive(Debug, Serialize)]
struct Coverage<'a> {
    #[serde(flatten)]
    report: &'a FitReport,
    tilt_profile_cells: usize,
    elev_profile_cells: usize,
    skipped_rows: &'a [SkippedRow],
}

/// Fits the correlation model and writes it with its profile, correlogram
/// and coverage sidecars. Output bytes depend only on the inputs.
pub fn run(input: &Path, out: &Path, config: &Config) -> Result<FitOutput> {
    let budget = config.budget()?;
    let data = ingest_csv(input, budget, &config.ingest)?;
    let fit = fit_correlation_model(&data.samples, &config.fit)?;
    for w in &fit.report.warnings {
        warn!("{w}");
    }
    write_text(out, &serialize_model(&fit.model)?)?;
    write_profile(
        &sidecar(out, "tilt_profile.csv"),
        &fit.tilt_profile,
        &config.fit.bins.elev,
        &config.fit.bins.tilt,
    )?;
    write_profile(
        &sidecar(out, "elev_profile.csv"),
        &fit.elev_profile,
        &config.fit.bins.tilt,
        &config.fit.bins.elev,
    )?;
    write_correlogram(&sidecar(out, "correlogram.csv"), &fit.dedm)?;
    write_json(
        &sidecar(out, "coverage.json"),
        &Coverage {
            report: &fit.report,
            tilt_profile_cells: fit.tilt_profile.matrices.iter().map(|m| m.present()).sum(),
            elev_profile_cells: fit.elev_profile.matrices.iter().map(|m| m.present()).sum(),
            skipped_rows: &data.skipped,
        },
    )?;
    Ok(fit)
}

fn write_profile(path: &Path, profile: &AngularProfile, cond: &BinAxis, axis: &BinAxis) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "cond_bin",
        "cond_deg",
        "ref_bin",
        "ref_deg",
        "other_bin",
        "other_deg",
        "rho",
        "n_ref",
        "n_other",
    ])?;
    for (c, m) in profile.matrices.iter().enumerate() {
        for i in 0..m.size {
            for j in 0..m.size {
                w.write_record([
                    c.to_string(),
                    num(cond.rep(c)),
                    i.to_string(),
                    num(axis.rep(i)),
                    j.to_string(),
                    num(axis.rep(j)),
                    opt(m.get(i, j)),
                    m.counts[i].to_string(),
                    m.counts[j].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_correlogram(path: &Path, fit: &DedmFit) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["lo_m", "hi_m", "distance_m", "pairs", "rho", "dedm"])?;
    for l in &fit.correlogram.lags {
        w.write_record([
            num(l.lo_m),
            num(l.hi_m),
            num(l.distance_m),
            l.pairs.to_string(),
            opt(l.rho),
            num(dedm_eval(&fit.params, l.distance_m)),
        ])?;
    }
    w.flush()?;
    Ok(())
}
