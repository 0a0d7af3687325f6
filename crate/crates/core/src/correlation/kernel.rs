use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::serde_util::ext_f64;

/// Upper bound on fitted decay constants; reached when no decay is observed.
/// A decay constant at or above the cap evaluates as a flat kernel.
pub const KERNEL_DECAY_CAP_DEG: f64 = 1e6;

/// Asymmetric exponential kernel over an angular separation: `q_pos` applies
/// when the other angle is at or above the reference, `q_neg` below it.
///
/// A decay constant at the cap or infinite gives a flat kernel (identically 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseExpKernel {
    #[serde(with = "ext_f64")]
    pub q_pos: f64,
    #[serde(with = "ext_f64")]
    pub q_neg: f64,
}

impl PiecewiseExpKernel {
    pub fn new(q_pos: f64, q_neg: f64) -> Result<Self> {
        let k = Self { q_pos, q_neg };
        k.validate()?;
        Ok(k)
    }

    pub const fn symmetric(q: f64) -> Self {
        Self { q_pos: q, q_neg: q }
    }

    pub const fn flat() -> Self {
        Self::symmetric(f64::INFINITY)
    }

    pub const fn capped() -> Self {
        Self::symmetric(KERNEL_DECAY_CAP_DEG)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_pos > 0.0) || !(self.q_neg > 0.0) {
            return Err(validation("kernel decay constants must be positive"));
        }
        Ok(())
    }

    /// Kernel value between a reference angle and another angle.
    pub fn eval(&self, reference: f64, other: f64) -> f64 {
        let q = if other >= reference { self.q_pos } else { self.q_neg };
        if q >= KERNEL_DECAY_CAP_DEG {
            return 1.0;
        }
        (-(reference - other).abs() / q).exp()
    }

    /// Signed-separation form: `separation >= 0` uses `q_pos`.
    pub fn at_separation(&self, separation: f64) -> f64 {
        self.eval(0.0, separation)
    }
}

/// Fits one decay constant per direction by least squares in the log
/// domain, `q = sum s^2 / (-sum s ln rho)`.
///
/// `rhos` are clamped to `[rho_floor, 1]` first. Points with zero separation
/// carry no information and are ignored. A direction without points inherits
/// the other direction's constant.
pub fn fit_piecewise_kernel(
    separations: &[f64],
    rhos: &[f64],
    increasing: &[bool],
    rho_floor: f64,
) -> Result<PiecewiseExpKernel> {
    if separations.len() != rhos.len() || separations.len() != increasing.len() {
        return Err(validation("separations, rhos and direction flags differ in length"));
    }
    if !(rho_floor > 0.0 && rho_floor < 1.0) {
        return Err(validation("rho floor must lie in (0, 1)"));
    }
    let fit_direction = |dir: bool| -> Option<f64> {
        let (mut ss, mut sl, mut n) = (0.0, 0.0, 0usize);
        for ((&s, &r), &inc) in separations.iter().zip(rhos).zip(increasing) {
            let s = s.abs();
            if inc != dir || !(s > 0.0) || r.is_nan() {
                continue;
            }
            let r = r.clamp(rho_floor, 1.0);
            ss += s * s;
            sl += s * r.ln();
            n += 1;
        }
        if n == 0 {
            return None;
        }
        let q = if -sl > 0.0 { ss / -sl } else { KERNEL_DECAY_CAP_DEG };
        Some(q.min(KERNEL_DECAY_CAP_DEG))
    };
    match (fit_direction(true), fit_direction(false)) {
        (Some(p), Some(n)) => Ok(PiecewiseExpKernel::symmetric(p).with_neg(n)),
        (Some(p), None) => Ok(PiecewiseExpKernel::symmetric(p)),
        (None, Some(n)) => Ok(PiecewiseExpKernel::symmetric(n)),
        (None, None) => Err(validation("no points with positive separation in either direction")),
    }
}

impl PiecewiseExpKernel {
    fn with_neg(mut self, q_neg: f64) -> Self {
        self.q_neg = q_neg;
        self
    }
}

/// Kernel table indexed by `(reference bin, conditioning bin)`. Absent cells
/// (not estimable from the data) evaluate as a flat kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTable {
    refs: usize,
    conds: usize,
    cells: Vec<Option<PiecewiseExpKernel>>,
}

impl KernelTable {
    pub fn filled(refs: usize, conds: usize, kernel: PiecewiseExpKernel) -> Self {
        Self {
            refs,
            conds,
            cells: vec![Some(kernel); refs * conds],
        }
    }

    pub fn empty(refs: usize, conds: usize) -> Self {
        Self {
            refs,
            conds,
            cells: vec![None; refs * conds],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.refs, self.conds)
    }

    pub fn get(&self, reference: usize, conditioning: usize) -> Option<&PiecewiseExpKernel> {
        self.cells[reference * self.conds + conditioning].as_ref()
    }

    pub fn set(&mut self, reference: usize, conditioning: usize, kernel: Option<PiecewiseExpKernel>) {
        self.cells[reference * self.conds + conditioning] = kernel;
    }

    pub fn absent_cells(&self) -> Vec<(usize, usize)> {
        (0..self.refs)
            .flat_map(|r| (0..self.conds).map(move |c| (r, c)))
            .filter(|&(r, c)| self.get(r, c).is_none())
            .collect()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Option<PiecewiseExpKernel>> {
        self.cells.iter_mut()
    }

    fn rows(&self) -> Vec<Vec<Option<PiecewiseExpKernel>>> {
        self.cells.chunks(self.conds.max(1)).map(<[_]>::to_vec).collect()
    }

    fn from_rows(rows: Vec<Vec<Option<PiecewiseExpKernel>>>) -> Result<Self> {
        let refs = rows.len();
        let conds = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != conds) {
            return Err(validation("kernel table rows have unequal lengths"));
        }
        for k in rows.iter().flatten().flatten() {
            k.validate()?;
        }
        Ok(Self {
            refs,
            conds,
            cells: rows.into_iter().flatten().collect(),
        })
    }
}

impl Serialize for KernelTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for KernelTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<Option<PiecewiseExpKernel>>>::deserialize(d)?;
        KernelTable::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kernel_evaluation() {
        let k = PiecewiseExpKernel::new(61.5, 20.0).unwrap();
        assert_eq!(k.eval(3.0, 3.0), 1.0);
        assert_abs_diff_eq!(k.eval(0.0, 10.0), 0.8498, epsilon = 2e-4);
        assert_abs_diff_eq!(k.eval(0.0, 10.0), (-10.0f64 / 61.5).exp(), epsilon = 1e-15);
        assert_ne!(k.eval(0.0, 5.0), k.eval(0.0, -5.0));
        assert_eq!(PiecewiseExpKernel::flat().eval(-90.0, 90.0), 1.0);
        assert!(PiecewiseExpKernel::capped().eval(0.0, 0.1) >= 0.9999999);
        assert_eq!(PiecewiseExpKernel::capped().eval(-90.0, 90.0), 1.0);
        assert!(PiecewiseExpKernel::symmetric(0.5 * KERNEL_DECAY_CAP_DEG).eval(0.0, 90.0) < 1.0);
        assert!(PiecewiseExpKernel::new(0.0, 1.0).is_err());
    }

    #[test]
    fn fit_examples() {
        let s = [5.0, 10.0, 15.0];
        let r: Vec<f64> = s.iter().map(|x: &f64| (-x / 30.0).exp()).collect();
        let k = fit_piecewise_kernel(&s, &r, &[true; 3], 1e-3).unwrap();
        assert_abs_diff_eq!(k.q_pos, 30.0, epsilon = 1e-6);
        assert_abs_diff_eq!(k.q_neg, 30.0, epsilon = 1e-6);

        let k = fit_piecewise_kernel(&s, &[1.0; 3], &[true, false, true], 1e-3).unwrap();
        assert_eq!((k.q_pos, k.q_neg), (KERNEL_DECAY_CAP_DEG, KERNEL_DECAY_CAP_DEG));

        let k = fit_piecewise_kernel(&[10.0], &[(-1.0f64).exp()], &[false], 1e-3).unwrap();
        assert_abs_diff_eq!(k.q_neg, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k.q_pos, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_separates_directions_and_clamps() {
        let s = [5.0, 10.0, 5.0, 10.0];
        let r = [
            (-5.0f64 / 40.0).exp(),
            (-10.0f64 / 40.0).exp(),
            (-0.5f64).exp(),
            (-1.0f64).exp(),
        ];
        let k = fit_piecewise_kernel(&s, &r, &[true, true, false, false], 1e-3).unwrap();
        assert_abs_diff_eq!(k.q_pos, 40.0, epsilon = 1e-9);
        assert_abs_diff_eq!(k.q_neg, 10.0, epsilon = 1e-9);

        // negative correlation is clamped to the floor
        let k = fit_piecewise_kernel(&[10.0], &[-0.4], &[true], 1e-3).unwrap();
        assert_abs_diff_eq!(k.q_pos, 10.0 / -(1e-3f64).ln(), epsilon = 1e-12);

        assert!(fit_piecewise_kernel(&[0.0], &[0.5], &[true], 1e-3).is_err());
        assert!(fit_piecewise_kernel(&[], &[], &[], 1e-3).is_err());
    }

    #[test]
    fn table_serializes_absent_cells_as_null() {
        let mut t = KernelTable::filled(2, 3, PiecewiseExpKernel::symmetric(12.0));
        t.set(1, 2, None);
        t.set(0, 0, Some(PiecewiseExpKernel::flat()));
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("null"));
        let back: KernelTable = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.absent_cells(), vec![(1, 2)]);
    }
}
