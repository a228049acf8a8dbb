use super::{BeamModel, DensityGrid};
use crate::geometry::PlanarFrame;
use crate::scalar::Real;

/// Per-cell snowflake density (flakes per m²) with the counts it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField<T> {
    frame: PlanarFrame,
    cell_size: f64,
    half_extent: f64,
    window: (f64, f64),
    dims: usize,
    hits: Vec<u32>,
    passes: Vec<u32>,
    lambda: Vec<T>,
}

/// Poisson estimate `ln(1 + h/m) / A_c` of one cell.
///
/// A cell with hits but no pass-through is read as `m = 1`; a cell with
/// neither is unobserved (`None`).
pub fn cell_density<T: Real>(h: u32, m: u32, collision_area: T) -> Option<T> {
    match (h, m) {
        (0, 0) => None,
        (0, _) => Some(T::zero()),
        (h, 0) => Some(T::of(h as f64).ln_1p() / collision_area),
        (h, m) => Some((T::of(h as f64) / T::of(m as f64)).ln_1p() / collision_area),
    }
}

/// Apply the per-cell estimator to every cell of `grid`.
pub fn estimate_density<T: Real>(grid: &DensityGrid, beam: &BeamModel<T>) -> DensityField<T> {
    let lambda = grid
        .hits()
        .iter()
        .zip(grid.passes())
        .map(|(&h, &m)| cell_density(h, m, beam.collision_area).unwrap_or_else(T::nan))
        .collect();
    DensityField {
        frame: *grid.frame(),
        cell_size: grid.config().cell_size,
        half_extent: grid.config().half_extent,
        window: grid.window(),
        dims: grid.dims(),
        hits: grid.hits().to_vec(),
        passes: grid.passes().to_vec(),
        lambda,
    }
}

/// Observed cell of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldCell<T> {
    pub cell: [usize; 2],
    pub center: [f64; 2],
    pub h: u32,
    pub m: u32,
    pub lambda: T,
}

impl<T: Real> DensityField<T> {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn frame(&self) -> &PlanarFrame {
        &self.frame
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    fn index(&self, cell: [usize; 2]) -> usize {
        cell[1] * self.dims + cell[0]
    }

    pub fn is_observed(&self, cell: [usize; 2]) -> bool {
        let i = self.index(cell);
        self.hits[i] > 0 || self.passes[i] > 0
    }

    /// Density of a cell, `None` when unobserved.
    pub fn lambda(&self, cell: [usize; 2]) -> Option<T> {
        self.is_observed(cell).then(|| self.lambda[self.index(cell)])
    }

    pub fn counts(&self, cell: [usize; 2]) -> (u32, u32) {
        let i = self.index(cell);
        (self.hits[i], self.passes[i])
    }

    pub fn cell_center(&self, cell: [usize; 2]) -> [f64; 2] {
        let c = self.cell_size;
        let h = self.half_extent;
        self.frame.to_world([-h + (cell[0] as f64 + 0.5) * c, -h + (cell[1] as f64 + 0.5) * c])
    }

    /// Observed cells in row-major order.
    pub fn observed(&self) -> impl Iterator<Item = FieldCell<T>> + '_ {
        (0..self.dims * self.dims).filter(|&i| self.hits[i] > 0 || self.passes[i] > 0).map(move |i| {
            let cell = [i % self.dims, i / self.dims];
            FieldCell { cell, center: self.cell_center(cell), h: self.hits[i], m: self.passes[i], lambda: self.lambda[i] }
        })
    }

    /// Observed cells whose center lies within `radius` of the world point
    /// `center`, scanning only the bounding box of the disk.
    pub fn observed_within(&self, center: [f64; 2], radius: f64) -> Vec<FieldCell<T>> {
        let local = self.frame.to_local(center);
        let c = self.cell_size;
        let h = self.half_extent;
        let n = self.dims as i64;
        let lo = |v: f64| (((v - radius + h) / c).floor() as i64 - 1).clamp(0, n - 1) as usize;
        let hi = |v: f64| (((v + radius + h) / c).ceil() as i64 + 1).clamp(0, n - 1) as usize;
        let r2 = radius * radius;
        let mut out = Vec::new();
        for iy in lo(local[1])..=hi(local[1]) {
            for ix in lo(local[0])..=hi(local[0]) {
                let i = iy * self.dims + ix;
                if self.hits[i] == 0 && self.passes[i] == 0 {
                    continue;
                }
                let cx = -h + (ix as f64 + 0.5) * c - local[0];
                let cy = -h + (iy as f64 + 0.5) * c - local[1];
                if cx * cx + cy * cy <= r2 {
                    let cell = [ix, iy];
                    out.push(FieldCell {
                        cell,
                        center: self.cell_center(cell),
                        h: self.hits[i],
                        m: self.passes[i],
                        lambda: self.lambda[i],
                    });
                }
            }
        }
        out
    }

    /// Field with the given per-cell values and counts; used to build test fixtures.
    pub fn from_parts(
        frame: PlanarFrame,
        cell_size: f64,
        half_extent: f64,
        dims: usize,
        hits: Vec<u32>,
        passes: Vec<u32>,
        lambda: Vec<T>,
    ) -> Self {
        assert_eq!(hits.len(), dims * dims);
        assert_eq!(passes.len(), dims * dims);
        assert_eq!(lambda.len(), dims * dims);
        Self { frame, cell_size, half_extent, window: (0.0, 0.0), dims, hits, passes, lambda }
    }
}
