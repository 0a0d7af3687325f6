use std::path::Path;

use anyhow::Result;
use csv::StringRecord;
use skyfade_core::propagation::decompose_sf;

use super::{csv_writer, num};
use crate::config::Config;
use crate::ingest::{read_measurements, SkippedRow, ANNOTATION_COLUMNS};

/// Annotates each valid row with its link geometry, two-ray estimate and
/// shadow fading. Existing annotation columns are dropped and recomputed.
pub fn run(input: &Path, out: &Path, config: &Config) -> Result<Vec<SkippedRow>> {
    let budget = config.budget()?;
    let m = read_measurements(input, budget, &config.ingest, true)?;
    let keep: Vec<usize> = (0..m.table.headers.len())
        .filter(|&i| !ANNOTATION_COLUMNS.contains(&&m.table.headers[i]))
        .collect();
    let mut w = csv_writer(out)?;
    let mut header: StringRecord = keep.iter().map(|&i| &m.table.headers[i]).collect();
    header.extend(ANNOTATION_COLUMNS);
    w.write_record(&header)?;
    for (k, s, g) in &m.rows {
        let sf = decompose_sf(s, g, budget)?;
        let rec = &m.table.records[*k].1;
        let mut row: Vec<String> = keep.iter().map(|&i| rec.get(i).unwrap_or("").to_string()).collect();
        row.extend(
            [g.theta_deg, g.delta_deg, g.d2d_m, g.d3d_m, sf.pl_est_dbm, sf.w_db]
                .into_iter()
                .map(num),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(m.skipped)
}
