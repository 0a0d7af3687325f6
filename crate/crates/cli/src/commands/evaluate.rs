//! Repeated random-subsampling evaluation.
//!
//! For each tuning-set size `M`, trials draw `M + tests_per_trial` distinct
//! rows, krige the test rows from the tuning rows under every configured
//! mode and record the RMSE of the predicted received power. Every mode sees
//! the same split. Trials run in parallel; each has its own RNG stream keyed
//! on `(M, trial)`, so results do not depend on scheduling.

use std::collections::HashSet;
use std::path::Path;

use anyhow::{bail, ensure, Result};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use skyfade_core::correlation::{CorrelationMode, CorrelationModel};
use skyfade_core::kriging::OrdinaryKriging;
use skyfade_core::propagation::SfSample;

use super::{csv_writer, load_model, num, write_json};
use crate::config::{Config, EvalConfig};
use crate::ingest::ingest_csv;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub m: usize,
    pub trial: usize,
    pub mode: CorrelationMode,
    pub rmse_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub m: usize,
    pub mode: CorrelationMode,
    pub trials: usize,
    pub predictions: usize,
    pub median_rmse_db: f64,
    pub rmse_db: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub seed: u64,
    pub rng: String,
    pub n_samples: usize,
    pub tests_per_trial: usize,
    pub total_test_predictions: usize,
    pub trials_per_m: usize,
    pub groups: Vec<GroupSummary>,
}

impl EvalSummary {
    pub fn group(&self, m: usize, mode: CorrelationMode) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.m == m && g.mode == mode)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutput {
    pub trials: Vec<TrialRecord>,
    pub summary: EvalSummary,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    0.5 * (v[(n - 1) / 2] + v[n / 2])
}

/// RNG for one trial: the master seed with stream `(M << 32) | trial`.
pub fn trial_rng(seed: u64, m: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((m as u64) << 32) | trial as u64);
    rng
}

/// Disjoint tuning and test index sets for one trial.
pub fn split(n: usize, m: usize, tests: usize, seed: u64, trial: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    ensure!(
        m + tests <= n,
        "M + tests_per_trial = {} exceeds the {n} available samples",
        m + tests
    );
    let idx = sample(&mut trial_rng(seed, m, trial), n, m + tests).into_vec();
    let (train, test) = idx.split_at(m);
    let seen: HashSet<usize> = train.iter().copied().collect();
    ensure!(test.iter().all(|i| !seen.contains(i)), "tuning and test sets overlap");
    Ok((train.to_vec(), test.to_vec()))
}

fn rmse(model: &CorrelationModel, train: &[SfSample], test: &[SfSample], mode: CorrelationMode) -> Result<f64> {
    let mut ok = OrdinaryKriging::new(train, model, mode)?;
    let mut sse = 0.0;
    for s in test {
        let z_hat = s.pl_est_dbm + ok.predict(&s.geometry)?.w_db;
        sse += (z_hat - s.rsrp_dbm).powi(2);
    }
    Ok((sse / test.len() as f64).sqrt())
}

pub fn evaluate(samples: &[SfSample], model: &CorrelationModel, config: &EvalConfig) -> Result<EvalOutput> {
    config.validate()?;
    model.validate()?;
    let n = samples.len();
    if let Some(&m) = config.m_values.iter().find(|&&m| m + config.tests_per_trial > n) {
        bail!(skyfade_core::Error::Validation(format!(
            "M = {m} plus {} test samples exceeds the {n} available samples",
            config.tests_per_trial
        )));
    }
    let trials_per_m = config.trials_per_m();
    let jobs: Vec<(usize, usize)> = config
        .m_values
        .iter()
        .flat_map(|&m| (0..trials_per_m).map(move |t| (m, t)))
        .collect();
    let per_job: Vec<Vec<TrialRecord>> = jobs
        .par_iter()
        .map(|&(m, trial)| {
            let (train, test) = split(n, m, config.tests_per_trial, config.seed, trial)?;
            let train: Vec<SfSample> = train.iter().map(|&i| samples[i]).collect();
            let test: Vec<SfSample> = test.iter().map(|&i| samples[i]).collect();
            config
                .modes
                .iter()
                .map(|&mode| {
                    Ok(TrialRecord {
                        m,
                        trial,
                        mode,
                        rmse_db: rmse(model, &train, &test, mode)?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let trials: Vec<TrialRecord> = per_job.into_iter().flatten().collect();
    let mut groups = Vec::new();
    for &m in &config.m_values {
        for &mode in &config.modes {
            let rmse_db: Vec<f64> = trials
                .iter()
                .filter(|r| r.m == m && r.mode == mode)
                .map(|r| r.rmse_db)
                .collect();
            groups.push(GroupSummary {
                m,
                mode,
                trials: rmse_db.len(),
                predictions: rmse_db.len() * config.tests_per_trial,
                median_rmse_db: median(&rmse_db),
                rmse_db,
            });
        }
    }
    Ok(EvalOutput {
        trials,
        summary: EvalSummary {
            seed: config.seed,
            rng: skyfade_core::fieldsim::RNG_ALGORITHM.to_string(),
            n_samples: n,
            tests_per_trial: config.tests_per_trial,
            total_test_predictions: config.total_test_predictions,
            trials_per_m,
            groups,
        },
    })
}

/// Writes `trials.csv` and `summary.json` into the `out` directory.
pub fn run(model: &Path, input: &Path, out: &Path, config: &Config) -> Result<EvalOutput> {
    let budget = config.budget()?;
    let model = load_model(model)?;
    let data = ingest_csv(input, budget, &config.ingest)?;
    let result = evaluate(&data.samples, &model, &config.eval)?;
    std::fs::create_dir_all(out)?;
    let mut w = csv_writer(&out.join("trials.csv"))?;
    w.write_record(["m", "trial", "mode", "rmse_db"])?;
    for r in &result.trials {
        w.write_record([r.m.to_string(), r.trial.to_string(), r.mode.to_string(), num(r.rmse_db)])?;
    }
    w.flush()?;
    write_json(&out.join("summary.json"), &result.summary)?;
    Ok(result)
}
