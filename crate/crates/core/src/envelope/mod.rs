//! Multiphase configurations as the lower envelope of κ level functions.
//!
//! Phase `k` is the region where `φ_k` attains the pointwise minimum of all
//! the fields. Phases are realized on the grid by labeling each cell with
//! the minimizing index at its centroid (ties go to the lowest index), so
//! the label field is a partition by construction.

mod contour;
mod junction;
mod regularity;

pub use contour::{interface_geometry, pairwise_interface, InterfaceGeometry, PairInterface, Segment};
pub use junction::{detect_tuple_points, triple_angles, TupleSearch, DEFAULT_EPS_RANK};
pub use regularity::{check_regularity, PairRegularity, RegularityReport, TupleRegularity};

use crate::error::Result;
use crate::grid::{GridSpec, LevelFunctionSet};

/// Phase index.
pub type Label = u8;

/// `min_k φ_k(x)` of the interpolated fields.
pub fn lower_envelope(phi: &LevelFunctionSet, x: &[f64]) -> Result<f64> {
    phi.grid().check_point(x)?;
    Ok(phi.values_at(x).into_iter().fold(f64::INFINITY, f64::min))
}

/// Smallest index attaining the minimum of the interpolated values at `x`.
pub fn argmin_label(phi: &LevelFunctionSet, x: &[f64]) -> Result<Label> {
    phi.grid().check_point(x)?;
    Ok(argmin(&phi.values_at(x)))
}

pub(crate) fn argmin(values: &[f64]) -> Label {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = k;
        }
    }
    best as Label
}

/// One phase label per grid cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseLabelField {
    grid: GridSpec,
    kappa: usize,
    labels: Vec<Label>,
}

impl PhaseLabelField {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, cell: usize) -> Label {
        self.labels[cell]
    }

    pub fn count(&self, k: Label) -> usize {
        self.labels.iter().filter(|&&l| l == k).count()
    }

    /// Measure of phase `k` at cell resolution.
    pub fn area(&self, k: Label) -> f64 {
        self.count(k) as f64 * self.grid.cell_volume()
    }

    pub fn areas(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.kappa];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
            .into_iter()
            .map(|c| c as f64 * self.grid.cell_volume())
            .collect()
    }
}

/// Labels every cell by `argmin_label` at its centroid.
pub fn extract_phases(phi: &LevelFunctionSet) -> PhaseLabelField {
    let grid = *phi.grid();
    let labels = (0..grid.cell_count())
        .map(|c| argmin(&phi.values_at(&grid.cell_centroid(c)[..grid.dim()])))
        .collect();
    PhaseLabelField {
        grid,
        kappa: phi.kappa(),
        labels,
    }
}
