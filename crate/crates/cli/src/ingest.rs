//! Measurement CSV ingestion.
//!
//! Rows that fail to parse, fall outside the valid ranges or have undefined
//! geometry are skipped and reported by line number. The file is refused
//! when the skipped fraction exceeds the configured limit.

use std::path::Path;

use anyhow::{Context, Result};
use csv::StringRecord;
use log::warn;
use serde::Serialize;
use skyfade_core::geometry::{wrap_deg, EulerAngles, Geodetic, LinkGeometry, MeasurementSample};
use skyfade_core::propagation::{decompose_sf, LinkBudget, SfSample};
use skyfade_core::Error;

use crate::config::IngestOptions;

pub const CANONICAL_COLUMNS: [&str; 8] = [
    "time_s",
    "lat_deg",
    "lon_deg",
    "alt_m",
    "yaw_deg",
    "pitch_deg",
    "roll_deg",
    "rsrp_dbm",
];

/// Columns appended by the geometry command.
pub const ANNOTATION_COLUMNS: [&str; 6] = ["theta_deg", "delta_deg", "d2d_m", "d3d_m", "pl_est_dbm", "sf_db"];

/// Raw CSV contents with canonical header names.
#[derive(Clone, Debug)]
pub struct Table {
    pub headers: StringRecord,
    /// Data records with their 1-based line numbers.
    pub records: Vec<(u64, StringRecord)>,
}

impl Table {
    pub fn read(path: &Path, options: &IngestOptions) -> Result<Self> {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::from_reader(file, options).with_context(|| format!("reading {}", path.display()))
    }

    pub fn from_reader<R: std::io::Read>(reader: R, options: &IngestOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let raw = rdr.headers().map_err(Error::from)?.clone();
        if raw.is_empty() || raw.iter().all(str::is_empty) {
            return Err(Error::Schema("empty file: no header row".into()).into());
        }
        let headers: StringRecord = raw
            .iter()
            .map(|h| options.column_map.get(h).map_or(h, String::as_str))
            .collect();
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(Error::from)?;
            let line = rec.position().map_or(0, |p| p.line());
            records.push((line, rec));
        }
        Ok(Self { headers, records })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, names: &[&str]) -> Result<Vec<usize>> {
        let missing: Vec<&str> = names.iter().copied().filter(|n| self.column(n).is_none()).collect();
        if !missing.is_empty() {
            return Err(Error::Schema(format!("missing columns: {}", missing.join(", "))).into());
        }
        Ok(names.iter().map(|n| self.column(n).unwrap()).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkippedRow {
    pub line: u64,
    pub reason: String,
}

/// Parsed measurements, each tagged with its index in [`Table::records`].
#[derive(Clone, Debug)]
pub struct Measurements {
    pub table: Table,
    pub rows: Vec<(usize, MeasurementSample, LinkGeometry)>,
    pub skipped: Vec<SkippedRow>,
}

fn field(rec: &StringRecord, idx: usize, name: &str) -> std::result::Result<f64, String> {
    let s = rec.get(idx).ok_or_else(|| format!("missing {name}"))?;
    let v: f64 = s.parse().map_err(|_| format!("{name}: cannot parse {s:?}"))?;
    if v.is_nan() {
        return Err(format!("{name} is NaN"));
    }
    Ok(v)
}

fn parse_row(rec: &StringRecord, cols: &[usize], with_rsrp: bool) -> std::result::Result<MeasurementSample, String> {
    let f = |k: usize| field(rec, cols[k], CANONICAL_COLUMNS[k]);
    let sample = MeasurementSample {
        time_s: f(0)?,
        position: Geodetic {
            lat_deg: f(1)?,
            lon_deg: f(2)?,
            alt_m: f(3)?,
        },
        attitude: EulerAngles::new(wrap_deg(f(4)?), f(5)?, wrap_deg(f(6)?)),
        rsrp_dbm: if with_rsrp { f(7)? } else { 0.0 },
    };
    sample.validate().map_err(|e| e.to_string())?;
    Ok(sample)
}

/// Centered running median; the window shrinks symmetrically at the ends.
pub fn median_filter(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let r = half.min(i).min(n - 1 - i);
            let mut w = values[i - r..=i + r].to_vec();
            w.sort_by(f64::total_cmp);
            w[r]
        })
        .collect()
}

/// Reads measurement rows and locates them relative to the transmitter.
/// Without `with_rsrp` the rsrp column is optional and ignored.
pub fn read_measurements(
    path: &Path,
    budget: &LinkBudget,
    options: &IngestOptions,
    with_rsrp: bool,
) -> Result<Measurements> {
    let table = Table::read(path, options)?;
    measurements_from_table(table, budget, options, with_rsrp)
}

pub fn measurements_from_table(
    table: Table,
    budget: &LinkBudget,
    options: &IngestOptions,
    with_rsrp: bool,
) -> Result<Measurements> {
    options.validate()?;
    let needed = if with_rsrp {
        &CANONICAL_COLUMNS[..]
    } else {
        &CANONICAL_COLUMNS[..7]
    };
    let mut cols = table.require(needed)?;
    cols.resize(8, usize::MAX);
    if table.records.is_empty() {
        return Err(Error::Schema("no data rows".into()).into());
    }
    let mut skipped = Vec::new();
    let mut parsed = Vec::new();
    for (k, (line, rec)) in table.records.iter().enumerate() {
        match parse_row(rec, &cols, with_rsrp) {
            Ok(s) => parsed.push((k, s)),
            Err(reason) => skipped.push(SkippedRow { line: *line, reason }),
        }
    }
    if let (Some(w), true) = (options.median_window, with_rsrp) {
        let rsrp: Vec<f64> = parsed.iter().map(|(_, s)| s.rsrp_dbm).collect();
        for ((_, s), v) in parsed.iter_mut().zip(median_filter(&rsrp, w)) {
            s.rsrp_dbm = v;
        }
    }
    let mut rows = Vec::with_capacity(parsed.len());
    for (k, s) in parsed {
        match budget.tx.locate(&s) {
            Ok(g) => rows.push((k, s, g)),
            Err(e) => skipped.push(SkippedRow {
                line: table.records[k].0,
                reason: e.to_string(),
            }),
        }
    }
    skipped.sort_by_key(|r| r.line);
    for r in &skipped {
        warn!("skipping line {}: {}", r.line, r.reason);
    }
    let total = table.records.len();
    if skipped.len() as f64 > options.max_invalid_fraction * total as f64 {
        let lines: Vec<String> = skipped.iter().take(10).map(|r| r.line.to_string()).collect();
        return Err(Error::Validation(format!(
            "{} of {total} rows invalid (limit {:.0}%), first at lines {}",
            skipped.len(),
            options.max_invalid_fraction * 100.0,
            lines.join(", ")
        ))
        .into());
    }
    Ok(Measurements { table, rows, skipped })
}

/// Measurements decomposed into two-ray estimate and shadow fading.
#[derive(Clone, Debug)]
pub struct Ingested {
    pub samples: Vec<SfSample>,
    pub skipped: Vec<SkippedRow>,
}

pub fn ingest_csv(path: &Path, budget: &LinkBudget, options: &IngestOptions) -> Result<Ingested> {
    let m = read_measurements(path, budget, options, true)?;
    decompose_all(&m, budget)
}

pub fn decompose_all(m: &Measurements, budget: &LinkBudget) -> Result<Ingested> {
    let samples = m
        .rows
        .iter()
        .map(|(_, s, g)| decompose_sf(s, g, budget))
        .collect::<skyfade_core::Result<Vec<_>>>()?;
    Ok(Ingested {
        samples,
        skipped: m.skipped.clone(),
    })
}
