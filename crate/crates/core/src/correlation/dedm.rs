use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::propagation::{sf_statistics, SfSample};

/// Double-exponential decaying model
/// `R(d) = a * exp(-p1 * d) + (1 - a) * exp(-p2 * d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DedmParams {
    pub a: f64,
    /// 1/m
    pub p1: f64,
    /// 1/m
    pub p2: f64,
}

impl DedmParams {
    pub fn new(a: f64, p1: f64, p2: f64) -> Result<Self> {
        let p = Self { a, p1, p2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.a) {
            return Err(validation(format!("DEDM weight a = {} outside [0, 1]", self.a)));
        }
        if !(self.p1 > 0.0 && self.p1.is_finite()) || !(self.p2 > 0.0 && self.p2.is_finite()) {
            return Err(validation("DEDM decay rates must be finite and positive"));
        }
        Ok(())
    }
}

pub fn dedm_eval(params: &DedmParams, d2d_m: f64) -> f64 {
    params.a * (-params.p1 * d2d_m).exp() + (1.0 - params.a) * (-params.p2 * d2d_m).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagBin {
    pub lo_m: f64,
    pub hi_m: f64,
    /// Mean pair distance inside the lag.
    pub distance_m: f64,
    pub pairs: usize,
    pub rho: Option<f64>,
}

/// Normalized covariance of SF pairs binned by horizontal distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlogram {
    pub lags: Vec<LagBin>,
}

impl Correlogram {
    pub fn empty_lags(&self) -> Vec<usize> {
        self.lags
            .iter()
            .enumerate()
            .filter(|(_, l)| l.rho.is_none())
            .map(|(i, _)| i)
            .collect()
    }

    /// `(distance, rho)` of every populated lag.
    pub fn points(&self) -> (Vec<f64>, Vec<f64>) {
        self.lags
            .iter()
            .filter_map(|l| l.rho.map(|r| (l.distance_m, r)))
            .unzip()
    }
}

pub fn empirical_correlogram(sf: &[SfSample], mu: f64, sigma2: f64, max_lag_m: f64, n_lags: usize) -> Correlogram {
    let width = max_lag_m / n_lags as f64;
    let mut sum = vec![0.0; n_lags];
    let mut dist = vec![0.0; n_lags];
    let mut count = vec![0usize; n_lags];
    for (i, a) in sf.iter().enumerate() {
        let ra = a.w_db - mu;
        for b in &sf[i + 1..] {
            let d = a.geometry.horizontal_distance_to(&b.geometry);
            if d >= max_lag_m {
                continue;
            }
            let k = ((d / width) as usize).min(n_lags - 1);
            sum[k] += ra * (b.w_db - mu);
            dist[k] += d;
            count[k] += 1;
        }
    }
    let lags = (0..n_lags)
        .map(|k| LagBin {
            lo_m: k as f64 * width,
            hi_m: (k + 1) as f64 * width,
            distance_m: if count[k] > 0 {
                dist[k] / count[k] as f64
            } else {
                (k as f64 + 0.5) * width
            },
            pairs: count[k],
            rho: (count[k] > 0).then(|| sum[k] / count[k] as f64 / sigma2),
        })
        .collect();
    Correlogram { lags }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DedmFit {
    pub params: DedmParams,
    pub correlogram: Correlogram,
    /// Largest absolute gap between fitted curve and populated lags.
    pub max_deviation: f64,
}

/// Largest fraction of empty lags tolerated before the fit is refused.
const MAX_EMPTY_LAG_FRACTION: f64 = 0.2;
const MIN_SAMPLES: usize = 100;

/// Builds the empirical correlogram and fits DEDM parameters to it.
pub fn fit_dedm(sf: &[SfSample], max_lag_m: f64, n_lags: usize) -> Result<DedmFit> {
    if sf.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "DEDM fit needs at least {MIN_SAMPLES} samples, got {}",
            sf.len()
        )));
    }
    if !(max_lag_m > 0.0) || n_lags < 3 {
        return Err(validation("DEDM fit needs max_lag > 0 and at least 3 lags"));
    }
    let stats = sf_statistics(sf)?;
    if !(stats.variance > 0.0) {
        return Err(Error::DegenerateCorrelation("shadow fading has zero variance".into()));
    }
    let correlogram = empirical_correlogram(sf, stats.mean, stats.variance, max_lag_m, n_lags);
    let empty = correlogram.empty_lags();
    if empty.len() as f64 > MAX_EMPTY_LAG_FRACTION * n_lags as f64 {
        return Err(Error::InsufficientCoverage { empty, total: n_lags });
    }
    let (d, rho) = correlogram.points();
    let params = fit_dedm_curve(&d, &rho)?;
    let max_deviation = d
        .iter()
        .zip(&rho)
        .map(|(&x, &y)| (dedm_eval(&params, x) - y).abs())
        .fold(0.0, f64::max);
    Ok(DedmFit {
        params,
        correlogram,
        max_deviation,
    })
}

const LOG_P_MIN: f64 = -6.0; // 1e-6 / m
const LOG_P_MAX: f64 = 1.0; // 10 / m

/// Bounded least-squares fit of `(a, p1, p2)` to `(distance, rho)` points.
///
/// For fixed rates the weight `a` enters linearly and is solved in closed
/// form (clamped to `[0, 1]`); the rates are searched on a log grid and then
/// refined by a shrinking pattern search. `p1 >= p2` is enforced so `p1` is
/// the fast component.
pub fn fit_dedm_curve(distances: &[f64], rhos: &[f64]) -> Result<DedmParams> {
    if distances.len() != rhos.len() || distances.len() < 2 {
        return Err(Error::InsufficientData("DEDM curve fit needs at least two lags".into()));
    }
    let cost = |lp1: f64, lp2: f64| -> (f64, f64) {
        let (p1, p2) = (10f64.powf(lp1), 10f64.powf(lp2));
        let (mut num, mut den) = (0.0, 0.0);
        for (&d, &r) in distances.iter().zip(rhos) {
            let e1 = (-p1 * d).exp();
            let e2 = (-p2 * d).exp();
            num += (r - e2) * (e1 - e2);
            den += (e1 - e2) * (e1 - e2);
        }
        let a = if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 1.0 };
        let sse = distances
            .iter()
            .zip(rhos)
            .map(|(&d, &r)| {
                let m = a * (-p1 * d).exp() + (1.0 - a) * (-p2 * d).exp();
                (m - r) * (m - r)
            })
            .sum();
        (sse, a)
    };

    const GRID: usize = 71;
    let step0 = (LOG_P_MAX - LOG_P_MIN) / (GRID - 1) as f64;
    let mut best = (f64::INFINITY, LOG_P_MIN, LOG_P_MIN);
    for i in 0..GRID {
        let lp1 = LOG_P_MIN + i as f64 * step0;
        for j in 0..=i {
            let lp2 = LOG_P_MIN + j as f64 * step0;
            let (c, _) = cost(lp1, lp2);
            if c < best.0 {
                best = (c, lp1, lp2);
            }
        }
    }

    let (mut c, mut lp1, mut lp2) = best;
    let mut step = step0;
    while step > 1e-9 {
        let mut improved = false;
        for (dp1, dp2) in [
            (step, 0.0),
            (-step, 0.0),
            (0.0, step),
            (0.0, -step),
            (step, step),
            (-step, -step),
        ] {
            let n1 = (lp1 + dp1).clamp(LOG_P_MIN, LOG_P_MAX);
            let n2 = (lp2 + dp2).clamp(LOG_P_MIN, LOG_P_MAX).min(n1);
            let (nc, _) = cost(n1, n2);
            if nc < c {
                (c, lp1, lp2) = (nc, n1, n2);
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let (_, a) = cost(lp1, lp2);
    DedmParams::new(a, 10f64.powf(lp1), 10f64.powf(lp2))
}
