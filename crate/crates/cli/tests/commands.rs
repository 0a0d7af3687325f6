mod common;

use common::*;
use rayon::prelude::*;
use skyfade::commands::{evaluate, fit, geometry, predict, simulate};
use skyfade::ingest::{ingest_csv, CANONICAL_COLUMNS};
use skyfade::{Config, EvalConfig, IngestOptions};
use skyfade_core::correlation::{deserialize_model, CorrelationMode, CorrelationModel, DedmParams, PiecewiseExpKernel};
use skyfade_core::fieldsim::{FlightSpec, SfGenerator};
use skyfade_core::Error;
use tempfile::TempDir;

fn small_flight() -> FlightSpec {
    FlightSpec {
        east_m: [-100.0, 100.0],
        north_m: [-100.0, 100.0],
        ..FlightSpec::default()
    }
}

/// Simulates a flight into `dir/flight.csv` and returns the config used.
fn simulate_into(dir: &TempDir, seed: u64, n: usize, truth: CorrelationModel) -> Config {
    let config = config_with(sim(seed, n, truth, SfGenerator::Covariance, small_flight()));
    simulate::run(&path(dir, "flight.csv"), &config, None).unwrap();
    config
}

fn schema_error(err: &anyhow::Error) -> bool {
    matches!(err.downcast_ref::<Error>(), Some(Error::Schema(_)))
}

#[test]
fn empty_file_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let p = path(&dir, "empty.csv");
    std::fs::write(&p, "").unwrap();
    let err = ingest_csv(&p, &budget(), &IngestOptions::default()).unwrap_err();
    assert!(schema_error(&err), "{err:#}");
}

#[test]
fn missing_column_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let p = path(&dir, "partial.csv");
    std::fs::write(
        &p,
        "time_s,lat_deg,lon_deg,alt_m,yaw_deg,pitch_deg,roll_deg\n0,35.7271,-78.696,30,0,0,0\n",
    )
    .unwrap();
    let err = ingest_csv(&p, &budget(), &IngestOptions::default()).unwrap_err();
    assert!(schema_error(&err), "{err:#}");
    assert!(format!("{err:#}").contains("rsrp_dbm"));
}

#[test]
fn simulated_file_ingests_without_skips() {
    let dir = TempDir::new().unwrap();
    let config = simulate_into(&dir, 1, 300, capped_model(0.0));
    let (headers, _) = rows(&path(&dir, "flight.csv"));
    assert_eq!(headers, CANONICAL_COLUMNS);
    let data = ingest_csv(&path(&dir, "flight.csv"), config.budget().unwrap(), &config.ingest).unwrap();
    assert_eq!(data.samples.len(), 300);
    assert!(data.skipped.is_empty());
}

#[test]
fn nan_rsrp_row_is_skipped_and_reported() {
    let dir = TempDir::new().unwrap();
    let config = simulate_into(&dir, 2, 50, capped_model(0.0));
    let p = path(&dir, "flight.csv");
    let mut lines: Vec<String> = read(&p).lines().map(String::from).collect();
    let mut fields: Vec<&str> = lines[5].split(',').collect();
    fields[7] = "NaN";
    lines[5] = fields.join(",");
    std::fs::write(&p, lines.join("\n")).unwrap();
    let data = ingest_csv(&p, config.budget().unwrap(), &config.ingest).unwrap();
    assert_eq!(data.samples.len(), 49);
    assert_eq!(data.skipped.len(), 1);
    assert_eq!(data.skipped[0].line, 6);
}

#[test]
fn too_many_invalid_rows_abort() {
    let dir = TempDir::new().unwrap();
    let config = simulate_into(&dir, 3, 50, capped_model(0.0));
    let p = path(&dir, "flight.csv");
    let text: Vec<String> = read(&p)
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i > 0 && i % 8 == 0 {
                l.replace(',', ";")
            } else {
                l.to_string()
            }
        })
        .collect();
    std::fs::write(&p, text.join("\n")).unwrap();
    let err = ingest_csv(&p, config.budget().unwrap(), &config.ingest).unwrap_err();
    assert!(format!("{err:#}").contains("6 of 50 rows invalid"), "{err:#}");
}

#[test]
fn column_map_accepts_external_headers() {
    let dir = TempDir::new().unwrap();
    let mut config = simulate_into(&dir, 4, 40, capped_model(0.0));
    let p = path(&dir, "flight.csv");
    let text = read(&p)
        .replacen("rsrp_dbm", "RSRP", 1)
        .replacen("lat_deg", "Latitude", 1);
    std::fs::write(&p, text).unwrap();
    assert!(ingest_csv(&p, config.budget().unwrap(), &config.ingest).is_err());
    config.ingest.column_map.insert("RSRP".into(), "rsrp_dbm".into());
    config.ingest.column_map.insert("Latitude".into(), "lat_deg".into());
    assert_eq!(
        ingest_csv(&p, config.budget().unwrap(), &config.ingest)
            .unwrap()
            .samples
            .len(),
        40
    );
}

#[test]
fn median_window_smooths_rsrp() {
    let dir = TempDir::new().unwrap();
    let mut config = simulate_into(&dir, 5, 60, capped_model(0.0));
    let p = path(&dir, "flight.csv");
    let raw = ingest_csv(&p, config.budget().unwrap(), &config.ingest)
        .unwrap()
        .samples;
    config.ingest.median_window = Some(5);
    let smooth = ingest_csv(&p, config.budget().unwrap(), &config.ingest)
        .unwrap()
        .samples;
    let mut window: Vec<f64> = raw[8..13].iter().map(|s| s.rsrp_dbm).collect();
    window.sort_by(f64::total_cmp);
    assert_eq!(smooth[10].rsrp_dbm, window[2]);
    assert_eq!(smooth[0].rsrp_dbm, raw[0].rsrp_dbm);
}

#[test]
fn geometry_annotates_and_reruns_idempotently() {
    let dir = TempDir::new().unwrap();
    let config = simulate_into(&dir, 6, 80, capped_model(0.0));
    let p = path(&dir, "flight.csv");
    // first row flown level
    let mut lines: Vec<String> = read(&p).lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[1].split(',').map(String::from).collect();
    fields[5] = "0".into();
    fields[6] = "0".into();
    lines[1] = fields.join(",");
    std::fs::write(&p, lines.join("\n")).unwrap();

    let once = path(&dir, "once.csv");
    let twice = path(&dir, "twice.csv");
    geometry::run(&p, &once, &config).unwrap();
    geometry::run(&once, &twice, &config).unwrap();
    let (h1, _) = rows(&once);
    let (h2, _) = rows(&twice);
    let mut expected: Vec<&str> = CANONICAL_COLUMNS.to_vec();
    expected.extend(["theta_deg", "delta_deg", "d2d_m", "d3d_m", "pl_est_dbm", "sf_db"]);
    assert_eq!(h1, expected);
    assert_eq!(h2, expected);
    assert_eq!(column(&once, "delta_deg")[0], 0.0);
    for c in ["theta_deg", "delta_deg", "d2d_m", "d3d_m", "pl_est_dbm", "sf_db"] {
        for (a, b) in column(&once, c).iter().zip(column(&twice, c)) {
            assert!((a - b).abs() <= 1e-9, "{c}: {a} vs {b}");
        }
    }
}

#[test]
fn fit_is_byte_identical_on_rerun() {
    let dir = TempDir::new().unwrap();
    let truth = model(
        DedmParams::new(0.6, 0.05, 0.005).unwrap(),
        PiecewiseExpKernel::symmetric(30.0),
        PiecewiseExpKernel::symmetric(30.0),
        0.0,
    );
    let mut config = simulate_into(&dir, 7, 600, truth);
    config.fit.max_lag_m = 150.0;
    config.fit.n_lags = 15;
    let (a, b) = (path(&dir, "a.json"), path(&dir, "b.json"));
    fit::run(&path(&dir, "flight.csv"), &a, &config).unwrap();
    fit::run(&path(&dir, "flight.csv"), &b, &config).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    deserialize_model(&read(&a)).unwrap();
    for s in [
        "tilt_profile.csv",
        "elev_profile.csv",
        "correlogram.csv",
        "coverage.json",
    ] {
        assert!(path(&dir, &format!("a.{s}")).exists(), "{s}");
        assert_eq!(
            read(&path(&dir, &format!("a.{s}"))),
            read(&path(&dir, &format!("b.{s}")))
        );
    }
}

#[test]
fn single_elevation_bin_leaves_elevation_kernels_absent() {
    let dir = TempDir::new().unwrap();
    // 60..141 m from the mast at 28 m altitude keeps elevation inside [10, 30)
    let flight = FlightSpec {
        east_m: [60.0, 100.0],
        north_m: [0.0, 100.0],
        lane_spacing_m: 10.0,
        ..FlightSpec::default()
    };
    let config = config_with(sim(8, 800, capped_model(0.0), SfGenerator::Covariance, flight));
    simulate::run(&path(&dir, "flight.csv"), &config, None).unwrap();
    let mut config = config;
    config.fit.max_lag_m = 100.0;
    config.fit.n_lags = 10;
    let out = fit::run(&path(&dir, "flight.csv"), &path(&dir, "m.json"), &config).unwrap();
    let m = &out.model;
    let (ne, nt) = m.elev_kernels.dims();
    assert!(m.elev_kernels.absent_cells().len() == ne * nt);
    assert!(!out.report.warnings.is_empty());
    assert!(
        m.tilt_kernels.get(2, 1).is_some(),
        "tilt kernels within the populated bin"
    );
    m.validate().unwrap();
    let coverage: serde_json::Value = serde_json::from_str(&read(&path(&dir, "m.coverage.json"))).unwrap();
    assert_eq!(coverage["absent_elev_kernels"].as_array().unwrap().len(), ne * nt);
}

/// Cell angle of the shift generator for tilt bin `t`, elevation bin `e`.
fn shift_phi(t: usize, e: usize) -> f64 {
    const TILT: [f64; 5] = [-10.0, -5.0, 0.0, 5.0, 10.0];
    const ELEV: [f64; 4] = [5.0, 20.0, 40.0, 70.0];
    let arm = |sep: f64, q: f64| sep.signum() * (-sep.abs() / q).exp().acos();
    let q_tilt = if e == 3 { 400.0 } else { -10.0 / 0.85f64.ln() };
    arm(ELEV[e] - 20.0, -20.0 / 0.6f64.ln()) + arm(TILT[t], q_tilt)
}

#[test]
fn fit_recovers_shift_profiles_per_cell() {
    // A single flight leaves cells of a few dozen samples with a spread of
    // 0.1 to 0.2, so cells are held to the median over 15 flights.
    let fits: Vec<_> = (1..=15u64)
        .into_par_iter()
        .map(|seed| {
            let dir = TempDir::new().unwrap();
            let mut config = shift_config(seed);
            config.fit.min_cell_count = 90;
            simulate::run(&path(&dir, "f.csv"), &config, None).unwrap();
            fit::run(&path(&dir, "f.csv"), &path(&dir, "m.json"), &config).unwrap()
        })
        .collect();
    let mut checked = 0;
    for (axis, conds, size) in [("tilt", 4, 5), ("elev", 5, 4)] {
        for c in 0..conds {
            for i in 0..size {
                for j in i + 1..size {
                    let (rho, oracle): (Vec<f64>, f64) = if axis == "tilt" {
                        let v = fits
                            .iter()
                            .filter_map(|f| f.tilt_profile.matrices[c].get(i, j))
                            .collect();
                        (v, (shift_phi(i, c) - shift_phi(j, c)).cos())
                    } else {
                        let v = fits
                            .iter()
                            .filter_map(|f| f.elev_profile.matrices[c].get(i, j))
                            .collect();
                        (v, (shift_phi(c, i) - shift_phi(c, j)).cos())
                    };
                    if rho.len() < 5 {
                        continue;
                    }
                    let m = median(rho.clone());
                    assert!(
                        (m - oracle).abs() <= 0.05,
                        "{axis} cond {c} ({i}, {j}): {m} vs {oracle} {rho:?}"
                    );
                    checked += 1;
                }
            }
        }
    }
    assert!(checked >= 4, "only {checked} cells populated");
}

fn write_model(dir: &TempDir, name: &str, m: &CorrelationModel) -> std::path::PathBuf {
    let p = path(dir, name);
    std::fs::write(&p, skyfade_core::correlation::serialize_model(m).unwrap()).unwrap();
    p
}

fn strong_model(nugget: f64) -> CorrelationModel {
    model(
        DedmParams::new(0.6, 0.05, 0.005).unwrap(),
        PiecewiseExpKernel::new(20.0, 12.0).unwrap(),
        PiecewiseExpKernel::new(25.0, 15.0).unwrap(),
        nugget,
    )
}

#[test]
fn predict_reproduces_a_tuning_row_without_nugget() {
    let dir = TempDir::new().unwrap();
    let config = simulate_into(&dir, 9, 120, strong_model(0.0));
    let model = write_model(&dir, "m.json", &strong_model(0.0));
    let flight = path(&dir, "flight.csv");
    let out = path(&dir, "pred.csv");
    let rows = predict::run(&model, &flight, &flight, &out, CorrelationMode::AngleAware, &config).unwrap();
    let z = ingest_csv(&flight, config.budget().unwrap(), &config.ingest)
        .unwrap()
        .samples;
    assert_eq!(rows.len(), z.len());
    for (r, s) in rows.iter().zip(&z) {
        assert!(
            (r.z_hat_dbm - s.rsrp_dbm).abs() < 1e-6,
            "{} vs {}",
            r.z_hat_dbm,
            s.rsrp_dbm
        );
    }
    let (h, _) = common::rows(&out);
    assert_eq!(h, ["time_s", "w_hat_db", "z_hat_dbm", "kriging_var_db2", "nugget_used"]);
}

#[test]
fn predict_from_one_tuning_row_is_constant() {
    let dir = TempDir::new().unwrap();
    let config = simulate_into(&dir, 10, 60, strong_model(0.0));
    let model = write_model(&dir, "m.json", &strong_model(0.0));
    let flight = path(&dir, "flight.csv");
    let one = path(&dir, "one.csv");
    let full = read(&flight);
    let text: Vec<&str> = full.lines().take(2).collect();
    std::fs::write(&one, text.join("\n")).unwrap();
    let w = ingest_csv(&one, config.budget().unwrap(), &config.ingest)
        .unwrap()
        .samples[0]
        .w_db;
    let rows = predict::run(
        &model,
        &one,
        &flight,
        &path(&dir, "p.csv"),
        CorrelationMode::AngleAware,
        &config,
    )
    .unwrap();
    assert!(rows.iter().all(|r| (r.w_hat_db - w).abs() < 1e-12));
}

#[test]
fn predict_modes_agree_on_capped_kernels() {
    let dir = TempDir::new().unwrap();
    let config = simulate_into(&dir, 11, 200, capped_model(1e-4));
    let model = write_model(&dir, "m.json", &capped_model(1e-4));
    let flight = path(&dir, "flight.csv");
    let tuning = path(&dir, "tuning.csv");
    let full = read(&flight);
    let lines: Vec<&str> = full.lines().collect();
    let mut t = lines[..1].to_vec();
    t.extend(lines.iter().skip(1).step_by(3));
    std::fs::write(&tuning, t.join("\n")).unwrap();
    let a = predict::run(
        &model,
        &tuning,
        &flight,
        &path(&dir, "a.csv"),
        CorrelationMode::Baseline,
        &config,
    )
    .unwrap();
    let b = predict::run(
        &model,
        &tuning,
        &flight,
        &path(&dir, "b.csv"),
        CorrelationMode::AngleAware,
        &config,
    )
    .unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.z_hat_dbm - y.z_hat_dbm).abs() < 1e-6);
    }
}

#[test]
fn evaluate_is_exact_when_every_target_repeats_a_tuning_point() {
    let dir = TempDir::new().unwrap();
    let config = simulate_into(&dir, 12, 5, capped_model(0.0));
    let samples = ingest_csv(&path(&dir, "flight.csv"), config.budget().unwrap(), &config.ingest)
        .unwrap()
        .samples;
    // five distinct poses, sixty copies each: any 150 of 300 rows cover all five
    let data: Vec<_> = (0..60).flat_map(|_| samples.iter().copied()).collect();
    let cfg = EvalConfig {
        m_values: vec![150],
        tests_per_trial: 100,
        total_test_predictions: 1000,
        seed: 3,
        modes: vec![CorrelationMode::Baseline, CorrelationMode::AngleAware],
    };
    let out = evaluate::evaluate(&data, &capped_model(0.0), &cfg).unwrap();
    assert!(out.trials.iter().all(|t| t.rmse_db < 1e-6), "{:?}", out.trials);
}

#[test]
fn evaluate_rejects_oversized_splits() {
    let dir = TempDir::new().unwrap();
    let config = simulate_into(&dir, 13, 120, capped_model(0.0));
    let samples = ingest_csv(&path(&dir, "flight.csv"), config.budget().unwrap(), &config.ingest)
        .unwrap()
        .samples;
    let cfg = EvalConfig {
        m_values: vec![50],
        tests_per_trial: 100,
        ..EvalConfig::default()
    };
    let err = evaluate::evaluate(&samples, &capped_model(0.0), &cfg).unwrap_err();
    assert!(
        matches!(err.downcast_ref::<Error>(), Some(Error::Validation(_))),
        "{err:#}"
    );
}

#[test]
fn evaluate_writes_reproducible_results() {
    let dir = TempDir::new().unwrap();
    let mut config = simulate_into(&dir, 14, 400, strong_model(1e-4));
    config.eval = EvalConfig {
        m_values: vec![20, 60],
        tests_per_trial: 30,
        total_test_predictions: 250,
        seed: 5,
        modes: vec![
            CorrelationMode::Baseline,
            CorrelationMode::AngleAware,
            CorrelationMode::TiltOnly,
        ],
    };
    let model = write_model(&dir, "m.json", &strong_model(1e-4));
    let flight = path(&dir, "flight.csv");
    let a = evaluate::run(&model, &flight, &path(&dir, "a"), &config).unwrap();
    let b = evaluate::run(&model, &flight, &path(&dir, "b"), &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(read(&path(&dir, "a/trials.csv")), read(&path(&dir, "b/trials.csv")));
    let summary: evaluate::EvalSummary = serde_json::from_str(&read(&path(&dir, "a/summary.json"))).unwrap();
    assert_eq!(summary, a.summary);
    for g in &summary.groups {
        // 9 trials of 30 cover 250 predictions with less than one trial to spare
        assert!(g.predictions >= 250 && g.predictions < 250 + 30);
        assert_eq!(g.rmse_db.len(), g.trials);
        assert_eq!(g.median_rmse_db, evaluate::median(&g.rmse_db));
    }
    assert_eq!(a.trials.len(), 2 * 9 * 3);
}

#[test]
fn simulate_is_deterministic_and_truth_round_trips() {
    let dir = TempDir::new().unwrap();
    let truth = strong_model(0.0);
    let config = config_with(sim(15, 150, truth.clone(), SfGenerator::Covariance, small_flight()));
    simulate::run(&path(&dir, "a.csv"), &config, None).unwrap();
    simulate::run(&path(&dir, "b.csv"), &config, None).unwrap();
    simulate::run(&path(&dir, "c.csv"), &config, Some(16)).unwrap();
    assert_eq!(read(&path(&dir, "a.csv")), read(&path(&dir, "b.csv")));
    assert_ne!(read(&path(&dir, "a.csv")), read(&path(&dir, "c.csv")));
    let sidecar = read(&path(&dir, "a.truth.json"));
    assert_eq!(deserialize_model(&sidecar).unwrap(), truth);
    let v: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
    assert_eq!(v["simulation"]["metadata"]["seed"], 15);
    assert_eq!(v["simulation"]["metadata"]["rng"], "ChaCha8Rng");
}

#[test]
fn config_file_round_trips() {
    let dir = TempDir::new().unwrap();
    let config = config_with(sim(1, 100, strong_model(0.0), SfGenerator::Covariance, small_flight()));
    let p = path(&dir, "config.json");
    std::fs::write(&p, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    assert_eq!(Config::load(Some(&p)).unwrap(), config);
    std::fs::write(&p, r#"{"eval": {"tests_per_trial": 0}}"#).unwrap();
    assert!(Config::load(Some(&p)).is_err());
    std::fs::write(&p, r#"{"evaluation": {}}"#).unwrap();
    assert!(Config::load(Some(&p)).is_err());
}
