use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Closed axis-aligned box `[lo, hi]` in R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl AxisBox {
    /// Returns `None` when the bounds disagree in length, are not finite, or
    /// some `lo[i] > hi[i]`.
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Option<Self> {
        if lo.len() != hi.len() {
            return None;
        }
        let ok = lo
            .iter()
            .zip(hi.iter())
            .all(|(l, h)| l.is_finite() && h.is_finite() && l <= h);
        ok.then_some(AxisBox { lo, hi })
    }

    pub fn from_slices(lo: &[f64], hi: &[f64]) -> Option<Self> {
        Self::new(DVector::from_column_slice(lo), DVector::from_column_slice(hi))
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lo + &self.hi) * 0.5
    }

    pub fn widths(&self) -> DVector<f64> {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.contains_within(x, 0.0)
    }

    /// Membership with every face pushed outwards by `tol`.
    pub fn contains_within(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &AxisBox) -> bool {
        (0..self.dim()).all(|i| other.lo[i] <= self.lo[i] && self.hi[i] <= other.hi[i])
    }

    /// True when the two boxes share a set of positive volume. Touching faces
    /// do not count.
    pub fn interiors_intersect(&self, other: &AxisBox) -> bool {
        (0..self.dim()).all(|i| self.lo[i].max(other.lo[i]) < self.hi[i].min(other.hi[i]))
    }

    /// True when the closed boxes share at least one point.
    pub fn intersects(&self, other: &AxisBox) -> bool {
        (0..self.dim()).all(|i| self.lo[i].max(other.lo[i]) <= self.hi[i].min(other.hi[i]))
    }

    /// Grows every side by `fraction` of the box width along that axis.
    pub fn inflated(&self, fraction: f64) -> AxisBox {
        let pad = self.widths() * fraction;
        AxisBox {
            lo: &self.lo - &pad,
            hi: &self.hi + &pad,
        }
    }

    /// Cartesian power `self × … × self` (`times` copies).
    pub fn power(&self, times: usize) -> AxisBox {
        let n = self.dim();
        let lo = DVector::from_fn(n * times, |i, _| self.lo[i % n]);
        let hi = DVector::from_fn(n * times, |i, _| self.hi[i % n]);
        AxisBox { lo, hi }
    }

    /// Smallest box containing every point, `None` for an empty iterator.
    pub fn bounding<'a, I>(points: I) -> Option<AxisBox>
    where
        I: IntoIterator<Item = &'a DVector<f64>>,
    {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in it {
            for i in 0..p.len() {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        Some(AxisBox { lo, hi })
    }
}
