use std::path::Path;

use anyhow::{anyhow, Result};
use skyfade_core::correlation::serialize_model;
use skyfade_core::fieldsim::{synthesize_dataset, SynthDataset};

use super::{csv_writer, num, sidecar, write_json};
use crate::config::Config;
use crate::ingest::CANONICAL_COLUMNS;

/// Writes a synthetic flight in the ingest schema plus a `<stem>.truth.json`
/// sidecar: the truth model document with a `simulation` metadata entry.
pub fn run(out: &Path, config: &Config, seed: Option<u64>) -> Result<SynthDataset> {
    let mut sim = config
        .sim
        .clone()
        .ok_or_else(|| anyhow!("config defines no `sim` section"))?;
    if let Some(s) = seed {
        sim.seed = s;
    }
    let data = synthesize_dataset(&sim)?;
    let mut w = csv_writer(out)?;
    w.write_record(CANONICAL_COLUMNS)?;
    for s in &data.samples {
        w.write_record(
            [
                s.time_s,
                s.position.lat_deg,
                s.position.lon_deg,
                s.position.alt_m,
                s.attitude.yaw_deg,
                s.attitude.pitch_deg,
                s.attitude.roll_deg,
                s.rsrp_dbm,
            ]
            .map(num),
        )?;
    }
    w.flush()?;
    let mut truth: serde_json::Value = serde_json::from_str(&serialize_model(&sim.truth)?)?;
    truth["simulation"] = serde_json::json!({
        "metadata": data.metadata,
        "flight": sim.flight,
        "budget": sim.budget,
        "noise_std_db": sim.noise_std_db,
    });
    write_json(&sidecar(out, "truth.json"), &truth)?;
    Ok(data)
}
