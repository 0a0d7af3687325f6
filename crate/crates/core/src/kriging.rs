//! Ordinary Kriging of shadow fading.
//!
//! The augmented system
//!
//! ```text
//! [ C   1 ] [ λ ]   [ c0 ]
//! [ 1ᵀ  0 ] [ ν ] = [ 1  ]
//! ```
//!
//! is solved by LU with partial pivoting. When a factorization fails, is
//! badly conditioned, or leaves a large residual, the diagonal nugget is
//! raised tenfold and the solve repeated, at most [`MAX_ESCALATIONS`] times.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::correlation::{dedm_eval, eval_correlation, CorrelationMode, CorrelationModel};
use crate::error::{validation, Error, Result};
use crate::geometry::LinkGeometry;
use crate::propagation::{rsrp_estimate, LinkBudget, SfSample};

pub const MAX_ESCALATIONS: usize = 6;
/// Relative residual `|Ax - b|_inf / |b|_inf` an accepted solve must meet.
pub const MAX_RELATIVE_RESIDUAL: f64 = 1e-8;
/// First escalated nugget, relative to the sill, when the base nugget is zero.
const ZERO_NUGGET_START: f64 = 1e-10;
/// Largest tolerated ratio between the extreme LU pivots.
const MAX_PIVOT_RATIO: f64 = 1e13;

#[derive(Clone, Debug, PartialEq)]
pub struct KrigingSystem {
    /// `C_ij = σ² r(i, j) + nugget [i = j]`
    pub cov: DMatrix<f64>,
    /// `c0_i = σ² r(i, target)`
    pub target_cov: DVector<f64>,
    /// Training SF values in the order of `cov`.
    pub values: Vec<f64>,
    pub sill: f64,
    pub nugget: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OkSolution {
    pub weights: DVector<f64>,
    pub multiplier: f64,
    pub nugget_used: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub w_db: f64,
    pub variance: f64,
    pub nugget_used: f64,
}

fn geometry_key(g: &LinkGeometry) -> [u64; 5] {
    [
        g.position.east.to_bits(),
        g.position.north.to_bits(),
        g.position.up.to_bits(),
        g.theta_deg.to_bits(),
        g.delta_deg.to_bits(),
    ]
}

/// Collapses samples with identical geometry: the first occurrence is kept
/// and carries the mean SF of the group.
pub fn dedup_training(training: &[SfSample]) -> Vec<SfSample> {
    let mut index: HashMap<[u64; 5], usize> = HashMap::new();
    let mut out: Vec<SfSample> = Vec::with_capacity(training.len());
    let mut counts: Vec<usize> = Vec::with_capacity(training.len());
    for s in training {
        match index.get(&geometry_key(&s.geometry)) {
            Some(&k) => {
                out[k].w_db += s.w_db;
                counts[k] += 1;
            }
            None => {
                index.insert(geometry_key(&s.geometry), out.len());
                out.push(*s);
                counts.push(1);
            }
        }
    }
    for (s, &n) in out.iter_mut().zip(&counts) {
        s.w_db /= n as f64;
    }
    out
}

fn correlation(model: &CorrelationModel, a: &LinkGeometry, b: &LinkGeometry, mode: CorrelationMode) -> Result<f64> {
    if mode == CorrelationMode::Baseline {
        return Ok(dedm_eval(&model.dedm, a.horizontal_distance_to(b)));
    }
    eval_correlation(model, a, b, mode)
}

fn training_cov(training: &[SfSample], model: &CorrelationModel, mode: CorrelationMode) -> Result<DMatrix<f64>> {
    let m = training.len();
    let mut cov = DMatrix::zeros(m, m);
    for i in 0..m {
        cov[(i, i)] = model.sigma2 + model.nugget;
        for j in i + 1..m {
            let c = model.sigma2 * correlation(model, &training[i].geometry, &training[j].geometry, mode)?;
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    Ok(cov)
}

fn target_cov(
    training: &[SfSample],
    target: &LinkGeometry,
    model: &CorrelationModel,
    mode: CorrelationMode,
) -> Result<DVector<f64>> {
    let mut c0 = DVector::zeros(training.len());
    for (i, s) in training.iter().enumerate() {
        c0[i] = model.sigma2 * correlation(model, &s.geometry, target, mode)?;
    }
    Ok(c0)
}

/// Builds the covariance system for one target. Duplicate training
/// geometries are merged first (see [`dedup_training`]).
pub fn assemble_system(
    training: &[SfSample],
    target: &LinkGeometry,
    model: &CorrelationModel,
    mode: CorrelationMode,
) -> Result<KrigingSystem> {
    if training.is_empty() {
        return Err(validation("kriging needs at least one training sample"));
    }
    let training = dedup_training(training);
    Ok(KrigingSystem {
        cov: training_cov(&training, model, mode)?,
        target_cov: target_cov(&training, target, model, mode)?,
        values: training.iter().map(|s| s.w_db).collect(),
        sill: model.sigma2,
        nugget: model.nugget,
    })
}

/// LU factorization of the augmented matrix at one nugget level.
struct Factor {
    aug: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
    nugget: f64,
}

impl Factor {
    /// `None` when the factorization is singular or badly conditioned.
    fn new(cov: &DMatrix<f64>, base_nugget: f64, nugget: f64) -> Option<Self> {
        let m = cov.nrows();
        let mut aug = DMatrix::zeros(m + 1, m + 1);
        aug.view_mut((0, 0), (m, m)).copy_from(cov);
        for i in 0..m {
            aug[(i, i)] += nugget - base_nugget;
            aug[(i, m)] = 1.0;
            aug[(m, i)] = 1.0;
        }
        let lu = aug.clone().lu();
        let u = lu.u();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for d in u.diagonal().iter() {
            lo = lo.min(d.abs());
            hi = hi.max(d.abs());
        }
        if !(lo > 0.0) || !(hi / lo < MAX_PIVOT_RATIO) {
            return None;
        }
        Some(Self { aug, lu, nugget })
    }

    /// Solves for one right-hand side, rejecting inaccurate solutions.
    fn solve(&self, c0: &DVector<f64>) -> Option<OkSolution> {
        let m = c0.len();
        let mut b = DVector::zeros(m + 1);
        b.rows_mut(0, m).copy_from(c0);
        b[m] = 1.0;
        let x = self.lu.solve(&b)?;
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let residual = (&self.aug * &x - &b).amax();
        if !(residual <= MAX_RELATIVE_RESIDUAL * b.amax()) {
            return None;
        }
        Some(OkSolution {
            weights: x.rows(0, m).into_owned(),
            multiplier: x[m],
            nugget_used: self.nugget,
        })
    }
}

/// Nugget at escalation `level`; level 0 is the system's own nugget.
fn ladder_nugget(base: f64, sill: f64, level: usize) -> f64 {
    match level {
        0 => base,
        k if base > 0.0 => base * 10f64.powi(k as i32),
        k => ZERO_NUGGET_START * sill * 10f64.powi(k as i32 - 1),
    }
}

/// Factorizes at `start_level` or above until `accept` succeeds.
fn escalate<T>(
    cov: &DMatrix<f64>,
    base: f64,
    sill: f64,
    start_level: usize,
    mut accept: impl FnMut(&Factor) -> Option<T>,
) -> Result<(Factor, T, usize)> {
    let mut nugget = base;
    for level in start_level..=MAX_ESCALATIONS {
        nugget = ladder_nugget(base, sill, level);
        if let Some(f) = Factor::new(cov, base, nugget) {
            if let Some(out) = accept(&f) {
                return Ok((f, out, level));
            }
        }
    }
    Err(Error::SingularSystem {
        attempts: MAX_ESCALATIONS + 1 - start_level.min(MAX_ESCALATIONS + 1),
        nugget,
    })
}

/// Solves the augmented system, escalating the nugget when needed.
pub fn solve_ok(system: &KrigingSystem) -> Result<OkSolution> {
    if system.cov.nrows() != system.target_cov.len() || system.cov.nrows() == 0 {
        return Err(validation("kriging system dimensions are inconsistent"));
    }
    let (_, sol, _) = escalate(&system.cov, system.nugget, system.sill, 0, |f| {
        f.solve(&system.target_cov)
    })?;
    Ok(sol)
}

fn finish(values: &[f64], c0: &DVector<f64>, sill: f64, sol: &OkSolution) -> Prediction {
    let w: f64 = sol.weights.iter().zip(values).map(|(l, v)| l * v).sum();
    let variance = (sill - sol.weights.dot(c0) - sol.multiplier).max(0.0);
    Prediction {
        w_db: w,
        variance,
        nugget_used: sol.nugget_used,
    }
}

/// Predicted SF at `target`, with the OK variance (floored at 0).
pub fn predict_sf(
    training: &[SfSample],
    target: &LinkGeometry,
    model: &CorrelationModel,
    mode: CorrelationMode,
) -> Result<Prediction> {
    let system = assemble_system(training, target, model, mode)?;
    let sol = solve_ok(&system)?;
    Ok(finish(&system.values, &system.target_cov, system.sill, &sol))
}

/// Predicted received power: two-ray estimate plus predicted SF.
pub fn predict_rsrp(
    training: &[SfSample],
    target: &LinkGeometry,
    budget: &LinkBudget,
    model: &CorrelationModel,
    mode: CorrelationMode,
) -> Result<f64> {
    let pl = rsrp_estimate(target, budget)?;
    Ok(pl + predict_sf(training, target, model, mode)?.w_db)
}

/// Kriging predictor over a fixed training set, factorized once and reused
/// for many targets.
pub struct OrdinaryKriging<'a> {
    model: &'a CorrelationModel,
    mode: CorrelationMode,
    training: Vec<SfSample>,
    values: Vec<f64>,
    cov: DMatrix<f64>,
    factor: Factor,
    level: usize,
}

impl<'a> OrdinaryKriging<'a> {
    pub fn new(training: &[SfSample], model: &'a CorrelationModel, mode: CorrelationMode) -> Result<Self> {
        if training.is_empty() {
            return Err(validation("kriging needs at least one training sample"));
        }
        let training = dedup_training(training);
        let cov = training_cov(&training, model, mode)?;
        // probe with the first training point as target
        let mut probe = cov.column(0).into_owned();
        probe[0] -= model.nugget;
        let (factor, _, level) = escalate(&cov, model.nugget, model.sigma2, 0, |f| f.solve(&probe))?;
        Ok(Self {
            model,
            mode,
            values: training.iter().map(|s| s.w_db).collect(),
            training,
            cov,
            factor,
            level,
        })
    }

    /// Training samples after deduplication.
    pub fn training(&self) -> &[SfSample] {
        &self.training
    }

    pub fn nugget_used(&self) -> f64 {
        self.factor.nugget
    }

    pub fn predict(&mut self, target: &LinkGeometry) -> Result<Prediction> {
        let c0 = target_cov(&self.training, target, self.model, self.mode)?;
        let sol = match self.factor.solve(&c0) {
            Some(sol) => sol,
            None => {
                let (factor, sol, level) =
                    escalate(&self.cov, self.model.nugget, self.model.sigma2, self.level + 1, |f| {
                        f.solve(&c0)
                    })?;
                self.factor = factor;
                self.level = level;
                sol
            }
        };
        Ok(finish(&self.values, &c0, self.model.sigma2, &sol))
    }
}
