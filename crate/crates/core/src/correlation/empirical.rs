//! Sorted-sample angular correlation estimators.
//!
//! Two SF subsets observed under different angular configurations are put in
//! one-to-one correspondence by sorting both ascending (the shift model makes
//! the conversion between configurations monotone). Their correlation is then
//! taken about the global SF mean rather than per-subset means, so the
//! estimate drops when the two subsets are offset from each other or differ
//! in spread.

use serde::{Deserialize, Serialize};

use super::bins::{AngleBins, BinAxis};
use crate::error::{validation, Error, Result};
use crate::propagation::SfSample;

/// Brings two SF lists to a common length `max(|a|, |b|)`.
///
/// The longer list is returned sorted. The shorter one is expanded through
/// its empirical quantile function: sorted values with linear interpolation
/// between order statistics, evaluated at `n` evenly spaced positions from
/// the first to the last plotting position.
pub fn balance_resample(w_a: &[f64], w_b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if w_a.is_empty() || w_b.is_empty() {
        return Err(validation("cannot balance an empty SF list"));
    }
    if w_a.iter().chain(w_b).any(|v| !v.is_finite()) {
        return Err(validation("SF lists must be finite"));
    }
    let n = w_a.len().max(w_b.len());
    let a = expand_sorted(sorted(w_a), n);
    let b = expand_sorted(sorted(w_b), n);
    Ok((a, b))
}

fn sorted(w: &[f64]) -> Vec<f64> {
    let mut v = w.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn expand_sorted(v: Vec<f64>, n: usize) -> Vec<f64> {
    let m = v.len();
    if m == n {
        return v;
    }
    if m == 1 || n == 1 {
        return vec![v[0]; n];
    }
    (0..n)
        .map(|k| {
            let t = k as f64 * (m - 1) as f64 / (n - 1) as f64;
            let lo = t.floor() as usize;
            if lo + 1 >= m {
                return v[m - 1];
            }
            let frac = t - lo as f64;
            v[lo] + frac * (v[lo + 1] - v[lo])
        })
        .collect()
}

/// Correlation of two paired SF vectors about the global mean `mu`.
///
/// The pairing is positional; pass ascending vectors from
/// [`balance_resample`] to get the sorted-sample estimator.
pub fn empirical_angular_correlation(w_ref: &[f64], w_other: &[f64], mu: f64) -> Result<f64> {
    if w_ref.len() != w_other.len() {
        return Err(validation(format!(
            "vectors must have equal length ({} vs {}); balance them first",
            w_ref.len(),
            w_other.len()
        )));
    }
    if w_ref.len() < 2 {
        return Err(validation("need at least two paired samples"));
    }
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in w_ref.iter().zip(w_other) {
        let (dx, dy) = (x - mu, y - mu);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let den = sxx.sqrt() * syy.sqrt();
    if !(den > 0.0) {
        return Err(Error::DegenerateCorrelation(
            "a vector is constant at the SF mean".into(),
        ));
    }
    Ok((sxy / den).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileAxis {
    /// Tilt bin pairs, conditioned on elevation bin.
    Tilt,
    /// Elevation bin pairs, conditioned on tilt bin.
    Elevation,
}

/// Square matrix of empirical correlations between the bins of one axis.
/// Absent entries mark under-populated bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileMatrix {
    pub size: usize,
    pub counts: Vec<usize>,
    rho: Vec<Option<f64>>,
}

impl ProfileMatrix {
    fn new(size: usize, counts: Vec<usize>) -> Self {
        Self {
            size,
            counts,
            rho: vec![None; size * size],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.rho[i * self.size + j]
    }

    fn set(&mut self, i: usize, j: usize, v: Option<f64>) {
        self.rho[i * self.size + j] = v;
    }

    pub fn present(&self) -> usize {
        self.rho.iter().filter(|v| v.is_some()).count()
    }
}

/// One profile matrix per conditioning bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularProfile {
    pub axis: ProfileAxis,
    pub min_count: usize,
    pub matrices: Vec<ProfileMatrix>,
}

/// Empirical tilt correlation between tilt bins, one matrix per elevation bin.
pub fn estimate_tilt_profile(sf: &[SfSample], bins: &AngleBins, mu: f64, min_count: usize) -> Result<AngularProfile> {
    estimate_profile(sf, bins, mu, min_count, ProfileAxis::Tilt)
}

/// Empirical elevation correlation between elevation bins, one matrix per
/// tilt bin.
///
/// Elevation changes imply horizontal relocation, but the relocation map
/// preserves the SF distribution, so the same sorted pairing applies without
/// constructing it.
pub fn estimate_elev_profile(sf: &[SfSample], bins: &AngleBins, mu: f64, min_count: usize) -> Result<AngularProfile> {
    estimate_profile(sf, bins, mu, min_count, ProfileAxis::Elevation)
}

fn estimate_profile(
    sf: &[SfSample],
    bins: &AngleBins,
    mu: f64,
    min_count: usize,
    axis: ProfileAxis,
) -> Result<AngularProfile> {
    bins.validate()?;
    if min_count < 2 {
        return Err(validation("minimum cell population must be at least 2"));
    }
    let (own, cond): (&BinAxis, &BinAxis) = match axis {
        ProfileAxis::Tilt => (&bins.tilt, &bins.elev),
        ProfileAxis::Elevation => (&bins.elev, &bins.tilt),
    };
    // cells[c][k]: SF values in conditioning bin c and own bin k
    let mut cells = vec![vec![Vec::new(); own.len()]; cond.len()];
    for s in sf {
        let t = bins.tilt.index_of(s.geometry.delta_deg);
        let e = bins.elev.index_of(s.geometry.theta_deg);
        let (Some(t), Some(e)) = (t, e) else { continue };
        let (k, c) = match axis {
            ProfileAxis::Tilt => (t, e),
            ProfileAxis::Elevation => (e, t),
        };
        cells[c][k].push(s.w_db);
    }

    let matrices = cells
        .iter()
        .map(|row| {
            let counts: Vec<usize> = row.iter().map(Vec::len).collect();
            let mut m = ProfileMatrix::new(own.len(), counts.clone());
            for i in 0..own.len() {
                if counts[i] < min_count {
                    continue;
                }
                m.set(i, i, Some(1.0));
                for j in i + 1..own.len() {
                    if counts[j] < min_count {
                        continue;
                    }
                    let (a, b) = balance_resample(&row[i], &row[j])?;
                    let rho = match empirical_angular_correlation(&a, &b, mu) {
                        Ok(r) => Some(r),
                        Err(Error::DegenerateCorrelation(_)) => None,
                        Err(e) => return Err(e),
                    };
                    m.set(i, j, rho);
                    m.set(j, i, rho);
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(AngularProfile {
        axis,
        min_count,
        matrices,
    })
}
