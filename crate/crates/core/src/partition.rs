//! Rectangular grid partition of a bounded state domain.
//!
//! Cells are half-open `[l, u)` along every axis except the last cell of each
//! axis, which is closed. Every point of the domain therefore belongs to
//! exactly one cell.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Zone, ZoneMap};
use crate::geometry::AxisBox;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("domain must satisfy lo < hi in every dimension")]
    EmptyDomain,
    #[error("expected {expected} cell counts, got {got}")]
    CountDimension { expected: usize, got: usize },
    #[error("cell counts must be positive")]
    ZeroCount,
    #[error("region id {0} out of range")]
    InvalidRegion(usize),
    #[error("box has dimension {got}, partition has {expected}")]
    BoxDimension { expected: usize, got: usize },
}

/// Flat cell index, row-major with the first dimension varying slowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegionId(pub usize);

impl RegionId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionLabel {
    Free,
    Goal,
    Critical,
}

/// How a cell is matched against a labeling box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// cell ⊆ box
    Contained,
    /// interior(cell) ∩ box ≠ ∅
    Intersecting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition")]
pub struct Partition {
    domain: AxisBox,
    counts: Vec<usize>,
    labels: Vec<RegionLabel>,
}

#[derive(Deserialize)]
struct RawPartition {
    domain: AxisBox,
    counts: Vec<usize>,
    labels: Vec<RegionLabel>,
}

impl TryFrom<RawPartition> for Partition {
    type Error = String;

    fn try_from(raw: RawPartition) -> Result<Self, String> {
        let mut p = Partition::new(raw.domain, raw.counts).map_err(|e| e.to_string())?;
        if raw.labels.len() != p.num_regions() {
            return Err(format!("expected {} labels, got {}", p.num_regions(), raw.labels.len()));
        }
        p.labels = raw.labels;
        Ok(p)
    }
}

impl Partition {
    pub fn new(domain: AxisBox, counts: Vec<usize>) -> Result<Self, PartitionError> {
        if domain.dim() == 0 || (0..domain.dim()).any(|i| !(domain.lo[i] < domain.hi[i])) {
            return Err(PartitionError::EmptyDomain);
        }
        if counts.len() != domain.dim() {
            return Err(PartitionError::CountDimension {
                expected: domain.dim(),
                got: counts.len(),
            });
        }
        if counts.contains(&0) {
            return Err(PartitionError::ZeroCount);
        }
        let total = counts.iter().product();
        Ok(Partition {
            domain,
            counts,
            labels: vec![RegionLabel::Free; total],
        })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn domain(&self) -> &AxisBox {
        &self.domain
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_regions(&self) -> usize {
        self.labels.len()
    }

    pub fn regions(&self) -> impl Iterator<Item = RegionId> {
        (0..self.num_regions()).map(RegionId)
    }

    pub fn label(&self, id: RegionId) -> RegionLabel {
        self.labels[id.0]
    }

    pub fn is_goal(&self, id: RegionId) -> bool {
        self.labels[id.0] == RegionLabel::Goal
    }

    pub fn is_critical(&self, id: RegionId) -> bool {
        self.labels[id.0] == RegionLabel::Critical
    }

    pub fn goal_regions(&self) -> Vec<RegionId> {
        self.with_label(RegionLabel::Goal)
    }

    pub fn critical_regions(&self) -> Vec<RegionId> {
        self.with_label(RegionLabel::Critical)
    }

    pub fn free_regions(&self) -> Vec<RegionId> {
        self.with_label(RegionLabel::Free)
    }

    fn with_label(&self, label: RegionLabel) -> Vec<RegionId> {
        self.regions().filter(|&r| self.label(r) == label).collect()
    }

    /// Per-dimension indices → flat id.
    pub fn encode(&self, idx: &[usize]) -> Result<RegionId, PartitionError> {
        if idx.len() != self.dim() {
            return Err(PartitionError::CountDimension {
                expected: self.dim(),
                got: idx.len(),
            });
        }
        let mut flat = 0usize;
        for (i, (&k, &m)) in idx.iter().zip(&self.counts).enumerate() {
            if k >= m {
                return Err(PartitionError::InvalidRegion(
                    flat * self.counts[i..].iter().product::<usize>() + k,
                ));
            }
            flat = flat * m + k;
        }
        Ok(RegionId(flat))
    }

    /// Flat id → per-dimension indices.
    pub fn decode(&self, id: RegionId) -> Result<Vec<usize>, PartitionError> {
        self.check(id)?;
        let mut rest = id.0;
        let mut idx = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            idx[i] = rest % self.counts[i];
            rest /= self.counts[i];
        }
        Ok(idx)
    }

    fn check(&self, id: RegionId) -> Result<(), PartitionError> {
        if id.0 < self.num_regions() {
            Ok(())
        } else {
            Err(PartitionError::InvalidRegion(id.0))
        }
    }

    /// Coordinate of the `j`-th grid plane along axis `i`.
    fn plane(&self, i: usize, j: usize) -> f64 {
        let m = self.counts[i];
        if j == m {
            return self.domain.hi[i];
        }
        let (lo, hi) = (self.domain.lo[i], self.domain.hi[i]);
        lo + (hi - lo) * (j as f64) / (m as f64)
    }

    /// Cell index along axis `i`, or `None` outside `[lo_i, hi_i]`.
    fn axis_index(&self, i: usize, v: f64) -> Option<usize> {
        let (lo, hi) = (self.domain.lo[i], self.domain.hi[i]);
        if !(v >= lo && v <= hi) {
            return None;
        }
        let m = self.counts[i];
        let mut j = (((v - lo) / (hi - lo)) * m as f64).floor() as usize;
        j = j.min(m - 1);
        // agree exactly with the planes used by `region_box`
        while j > 0 && v < self.plane(i, j) {
            j -= 1;
        }
        while j + 1 < m && v >= self.plane(i, j + 1) {
            j += 1;
        }
        Some(j)
    }

    /// Cell containing `x`, `None` when `x` lies outside the domain.
    pub fn region_of(&self, x: &DVector<f64>) -> Option<RegionId> {
        if x.len() != self.dim() {
            return None;
        }
        let mut flat = 0usize;
        for i in 0..self.dim() {
            flat = flat * self.counts[i] + self.axis_index(i, x[i])?;
        }
        Some(RegionId(flat))
    }

    pub fn region_box(&self, id: RegionId) -> Result<AxisBox, PartitionError> {
        let idx = self.decode(id)?;
        let lo = DVector::from_fn(self.dim(), |i, _| self.plane(i, idx[i]));
        let hi = DVector::from_fn(self.dim(), |i, _| self.plane(i, idx[i] + 1));
        Ok(AxisBox { lo, hi })
    }

    pub fn region_center(&self, id: RegionId) -> Result<DVector<f64>, PartitionError> {
        Ok(self.region_box(id)?.center())
    }

    /// The `2ⁿ` corners, ordered by corner bitmask with the first dimension
    /// as the most significant bit.
    pub fn region_vertices(&self, id: RegionId) -> Result<Vec<DVector<f64>>, PartitionError> {
        Ok(box_vertices(&self.region_box(id)?))
    }

    /// Cells whose closed box meets the closed box `b`.
    pub fn regions_meeting(&self, b: &AxisBox) -> Vec<RegionId> {
        if b.dim() != self.dim() || !b.intersects(&self.domain) {
            return Vec::new();
        }
        let per_axis: Vec<Vec<usize>> = (0..self.dim())
            .map(|i| {
                (0..self.counts[i])
                    .filter(|&j| self.plane(i, j) <= b.hi[i] && self.plane(i, j + 1) >= b.lo[i])
                    .collect()
            })
            .collect();
        let mut out = vec![0usize];
        for (i, idx) in per_axis.iter().enumerate() {
            out = out
                .iter()
                .flat_map(|&flat| idx.iter().map(move |&j| flat * self.counts[i] + j))
                .collect();
        }
        out.into_iter().map(RegionId).collect()
    }

    /// True when `x` lies in cell `id` under the half-open convention.
    pub fn cell_contains(&self, id: RegionId, x: &DVector<f64>) -> bool {
        let Ok(idx) = self.decode(id) else {
            return false;
        };
        (0..self.dim()).all(|i| {
            let lo = self.plane(i, idx[i]);
            let hi = self.plane(i, idx[i] + 1);
            let top = idx[i] + 1 == self.counts[i];
            x[i] >= lo && (x[i] < hi || (top && x[i] <= hi))
        })
    }

    /// Labels cells against goal and critical boxes. Any previous labels are
    /// discarded. A cell matching both kinds is critical.
    pub fn label_regions(
        mut self,
        goal_boxes: &[AxisBox],
        critical_boxes: &[AxisBox],
        goal_mode: LabelMode,
        critical_mode: LabelMode,
    ) -> Result<Self, PartitionError> {
        for b in goal_boxes.iter().chain(critical_boxes) {
            if b.dim() != self.dim() {
                return Err(PartitionError::BoxDimension {
                    expected: self.dim(),
                    got: b.dim(),
                });
            }
        }
        let matches = |cell: &AxisBox, b: &AxisBox, mode: LabelMode| match mode {
            LabelMode::Contained => cell.is_subset_of(b),
            LabelMode::Intersecting => cell.interiors_intersect(b),
        };
        for r in 0..self.num_regions() {
            let cell = self.region_box(RegionId(r))?;
            self.labels[r] = if critical_boxes.iter().any(|b| matches(&cell, b, critical_mode)) {
                RegionLabel::Critical
            } else if goal_boxes.iter().any(|b| matches(&cell, b, goal_mode)) {
                RegionLabel::Goal
            } else {
                RegionLabel::Free
            };
        }
        Ok(self)
    }

    /// [`Partition::label_regions`] with goal cells contained in a goal box and
    /// critical cells meeting a critical box.
    pub fn with_default_labels(
        self,
        goal_boxes: &[AxisBox],
        critical_boxes: &[AxisBox],
    ) -> Result<Self, PartitionError> {
        self.label_regions(
            goal_boxes,
            critical_boxes,
            LabelMode::Contained,
            LabelMode::Intersecting,
        )
    }
}

impl ZoneMap for Partition {
    fn zone(&self, x: &DVector<f64>) -> Zone {
        match self.region_of(x).map(|r| self.label(r)) {
            None | Some(RegionLabel::Critical) => Zone::Unsafe,
            Some(RegionLabel::Goal) => Zone::Goal,
            Some(RegionLabel::Free) => Zone::Free,
        }
    }
}

pub fn box_vertices(b: &AxisBox) -> Vec<DVector<f64>> {
    let n = b.dim();
    (0..1usize << n)
        .map(|mask| {
            DVector::from_fn(n, |i, _| {
                if mask >> (n - 1 - i) & 1 == 1 {
                    b.hi[i]
                } else {
                    b.lo[i]
                }
            })
        })
        .collect()
}
