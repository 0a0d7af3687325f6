use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::serde_util::ext_f64_vec;

/// Partition of one angle axis into contiguous bins with a representative
/// angle per bin.
///
/// A value lying exactly on an interior edge belongs to the bin nearer zero,
/// so with the default tilt edges `-3` and `3` both fall into the central bin
/// and elevation `10` falls into `(0, 10]`. The same rule makes the outer
/// elevation bounds behave as `(0, 90]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinAxis {
    #[serde(with = "ext_f64_vec")]
    pub edges: Vec<f64>,
    pub reps: Vec<f64>,
}

impl BinAxis {
    pub fn new(edges: Vec<f64>, reps: Vec<f64>) -> Result<Self> {
        let axis = Self { edges, reps };
        axis.validate()?;
        Ok(axis)
    }

    pub fn default_tilt() -> Self {
        Self {
            edges: vec![f64::NEG_INFINITY, -7.0, -3.0, 3.0, 7.0, f64::INFINITY],
            reps: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
        }
    }

    pub fn default_elevation() -> Self {
        Self {
            edges: vec![0.0, 10.0, 30.0, 50.0, 90.0],
            reps: vec![5.0, 20.0, 40.0, 70.0],
        }
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.len() < 2 {
            return Err(validation("bin axis needs at least two edges"));
        }
        if self.edges.iter().any(|e| e.is_nan()) || self.reps.iter().any(|r| !r.is_finite()) {
            return Err(validation("bin edges/representatives must not be NaN"));
        }
        if self.edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(validation("bin edges must be strictly increasing"));
        }
        if self.reps.len() != self.edges.len() - 1 {
            return Err(validation(format!(
                "{} bins but {} representatives",
                self.edges.len() - 1,
                self.reps.len()
            )));
        }
        let n = self.reps.len();
        for k in 1..n.saturating_sub(1) {
            let r = self.reps[k];
            if r < self.edges[k] || r > self.edges[k + 1] {
                return Err(validation(format!(
                    "representative {r} outside bin [{}, {}]",
                    self.edges[k],
                    self.edges[k + 1]
                )));
            }
        }
        Ok(())
    }

    /// Bin index of `angle`, or `None` outside the axis.
    pub fn index_of(&self, angle: f64) -> Option<usize> {
        if angle.is_nan() {
            return None;
        }
        let e = &self.edges;
        let n = e.len() - 1;
        // first edge strictly greater than angle
        let k = e.partition_point(|&x| x <= angle);
        if k > 0 && e[k - 1] == angle {
            // on an edge: take the side nearer zero
            let edge_idx = k - 1;
            let bin = if angle >= 0.0 {
                edge_idx.checked_sub(1)
            } else {
                Some(edge_idx)
            };
            return bin.filter(|&b| b < n);
        }
        if k == 0 || k > n {
            None
        } else {
            Some(k - 1)
        }
    }

    pub fn rep(&self, bin: usize) -> f64 {
        self.reps[bin]
    }

    /// Bin whose representative is nearest to `angle`.
    pub fn nearest_rep(&self, angle: f64) -> usize {
        self.reps
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - angle).abs().total_cmp(&(b.1 - angle).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Tilt and elevation partitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleBins {
    pub tilt: BinAxis,
    pub elev: BinAxis,
}

impl Default for AngleBins {
    fn default() -> Self {
        Self {
            tilt: BinAxis::default_tilt(),
            elev: BinAxis::default_elevation(),
        }
    }
}

impl AngleBins {
    pub fn validate(&self) -> Result<()> {
        self.tilt.validate()?;
        self.elev.validate()
    }
}
