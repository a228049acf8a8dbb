//! Hit / pass-through counting on a tessellated 2-D grid and the per-cell
//! Poisson density estimate derived from it.

mod export;
mod field;
pub mod traversal;
mod window;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PlanarFrame;
use crate::io::Scan;
use crate::scalar::Real;

pub use export::{field_to_table, grid_dump_bytes, read_grid_dump, write_grid_dump};
pub use field::{cell_density, estimate_density, DensityField, FieldCell};
pub use traversal::{LatticeWalk, WalkStep};
pub use window::{sensor_pose_at, strip_project, window_bounds, window_field, window_field_in_frame, Ray2};

/// Default lidar beam aperture, 0.085 degrees.
pub const DEFAULT_APERTURE_DEG: f64 = 0.085;
/// Default collision area, 40 x 40 cm.
pub const DEFAULT_COLLISION_AREA: f64 = 0.16;
/// Default half height of the z strip, for a 1 m strip.
pub const DEFAULT_STRIP_HALF_HEIGHT: f64 = 0.5;
/// Default cell edge, 10 cm.
pub const DEFAULT_CELL_SIZE: f64 = 0.10;
/// Default time window, 1 s.
pub const DEFAULT_WINDOW_TAU: f64 = 1.0;
pub const DEFAULT_HALF_EXTENT: f64 = 25.0;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("scan at t={t} is outside the grid window [{start}, {end}]")]
    OutsideWindow { t: f64, start: f64, end: f64 },
    #[error("no scans in window [{start}, {end}]")]
    NoScans { start: f64, end: f64 },
    #[error("all {scans} scans in window [{start}, {end}] have no points inside the z strip")]
    NoStripPoints { scans: usize, start: f64, end: f64 },
    #[error("grids differ in geometry and cannot be merged")]
    GeometryMismatch,
    #[error("invalid grid configuration: {0}")]
    InvalidConfig(String),
    #[error("grid dump: {0}")]
    Dump(String),
}

/// Beam divergence, collision area and z-strip half height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamModel<T> {
    /// Beam aperture angle in radians.
    pub aperture: T,
    /// Area attributed to one collision, m².
    pub collision_area: T,
    /// Half of the z-strip height, meters.
    pub strip_half_height: T,
}

impl<T: Real> Default for BeamModel<T> {
    fn default() -> Self {
        Self {
            aperture: T::of(DEFAULT_APERTURE_DEG.to_radians()),
            collision_area: T::of(DEFAULT_COLLISION_AREA),
            strip_half_height: T::of(DEFAULT_STRIP_HALF_HEIGHT),
        }
    }
}

impl<T: Real> BeamModel<T> {
    pub fn validate(&self) -> Result<(), GridError> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.aperture) || !positive(self.collision_area) || !positive(self.strip_half_height) {
            return Err(GridError::InvalidConfig(format!("beam parameters must be positive and finite: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    /// `[t - tau/2, t + tau/2]`
    #[default]
    Centered,
    /// `[t - tau, t]`
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub cell_size: f64,
    pub half_extent: f64,
    pub window_tau: f64,
    pub window_mode: WindowMode,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            cell_size: DEFAULT_CELL_SIZE,
            half_extent: DEFAULT_HALF_EXTENT,
            window_tau: DEFAULT_WINDOW_TAU,
            window_mode: WindowMode::Centered,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(GridError::InvalidConfig("cell_size must be positive".into()));
        }
        if !(self.half_extent >= self.cell_size && self.half_extent.is_finite()) {
            return Err(GridError::InvalidConfig("half_extent must be at least cell_size".into()));
        }
        if !(self.window_tau > 0.0 && self.window_tau.is_finite()) {
            return Err(GridError::InvalidConfig("window_tau must be positive".into()));
        }
        Ok(())
    }

    /// Cells per axis, `ceil(2 * half_extent / cell_size)`.
    pub fn dims(&self) -> usize {
        let n = 2.0 * self.half_extent / self.cell_size;
        // 2 * 25 / 0.1 is 500.00000000000006 in binary
        (n - 1e-9).ceil().max(1.0) as usize
    }
}

/// Result of traversing one 2-D ray through the grid.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Traversal {
    /// Cells crossed without terminating, in order from the ray origin.
    pub pass_cells: Vec<[usize; 2]>,
    /// Cell containing the endpoint; `None` when the endpoint is outside the grid.
    pub hit_cell: Option<[usize; 2]>,
}

/// Per-cell collision counts `h` and pass-through counts `m` over a time window.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    config: GridConfig,
    frame: PlanarFrame,
    window: (f64, f64),
    dims: usize,
    hits: Vec<u32>,
    passes: Vec<u32>,
}

impl DensityGrid {
    pub fn new(config: GridConfig, frame: PlanarFrame, window: (f64, f64)) -> Result<Self, GridError> {
        config.validate()?;
        if !(window.0 <= window.1) {
            return Err(GridError::InvalidConfig(format!("window start {} is after end {}", window.0, window.1)));
        }
        let dims = config.dims();
        Ok(Self { config, frame, window, dims, hits: vec![0; dims * dims], passes: vec![0; dims * dims] })
    }

    pub(crate) fn from_counts(
        config: GridConfig,
        frame: PlanarFrame,
        window: (f64, f64),
        hits: Vec<u32>,
        passes: Vec<u32>,
    ) -> Result<Self, GridError> {
        let mut grid = Self::new(config, frame, window)?;
        if hits.len() != grid.hits.len() || passes.len() != grid.passes.len() {
            return Err(GridError::GeometryMismatch);
        }
        grid.hits = hits;
        grid.passes = passes;
        Ok(grid)
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn frame(&self) -> &PlanarFrame {
        &self.frame
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn hits(&self) -> &[u32] {
        &self.hits
    }

    pub fn passes(&self) -> &[u32] {
        &self.passes
    }

    pub fn index(&self, cell: [usize; 2]) -> usize {
        cell[1] * self.dims + cell[0]
    }

    pub fn h(&self, cell: [usize; 2]) -> u32 {
        self.hits[self.index(cell)]
    }

    pub fn m(&self, cell: [usize; 2]) -> u32 {
        self.passes[self.index(cell)]
    }

    /// Cell center in world coordinates.
    pub fn cell_center(&self, cell: [usize; 2]) -> [f64; 2] {
        let c = self.config.cell_size;
        let h = self.config.half_extent;
        self.frame.to_world([-h + (cell[0] as f64 + 0.5) * c, -h + (cell[1] as f64 + 0.5) * c])
    }

    /// World point to lattice units of this grid.
    fn lattice(&self, p: [f64; 2]) -> [f64; 2] {
        let local = self.frame.to_local(p);
        let h = self.config.half_extent;
        let c = self.config.cell_size;
        [(local[0] + h) / c, (local[1] + h) / c]
    }

    fn in_grid(&self, cell: [i64; 2]) -> Option<[usize; 2]> {
        let n = self.dims as i64;
        (cell[0] >= 0 && cell[1] >= 0 && cell[0] < n && cell[1] < n).then(|| [cell[0] as usize, cell[1] as usize])
    }

    /// Cell containing a world point, if inside the grid.
    pub fn cell_of(&self, p: [f64; 2]) -> Option<[usize; 2]> {
        LatticeWalk::new(self.lattice(p), self.lattice(p)).next().and_then(|s| self.in_grid(s.cell))
    }

    /// Visit the cells of a ray: `visit(cell, is_hit)`. Returns `false` when
    /// the ray origin lies outside the grid (nothing is visited).
    fn walk_ray(&self, ray: &Ray2, mut visit: impl FnMut(usize, bool)) -> bool {
        let n = self.dims as i64;
        let mut inside = false;
        LatticeWalk::new(self.lattice(ray.origin), self.lattice(ray.end)).for_each_cell(|c, last| {
            if c[0] < 0 || c[1] < 0 || c[0] >= n || c[1] >= n {
                // origin outside, or the ray left the grid after only passes
                return false;
            }
            inside = true;
            visit(c[1] as usize * self.dims + c[0] as usize, last);
            true
        });
        inside
    }

    /// Ordered pass cells and the hit cell of `ray`. `None` when the ray origin is outside the grid.
    pub fn traverse(&self, ray: &Ray2) -> Option<Traversal> {
        let mut out = Traversal::default();
        let dims = self.dims;
        let inside = self.walk_ray(ray, |idx, hit| {
            let cell = [idx % dims, idx / dims];
            if hit {
                out.hit_cell = Some(cell);
            } else {
                out.pass_cells.push(cell);
            }
        });
        inside.then_some(out)
    }

    /// Add the counts of one ray. Returns `false` if its origin is outside the grid.
    pub fn add_ray(&mut self, ray: &Ray2) -> bool {
        let mut hits = std::mem::take(&mut self.hits);
        let mut passes = std::mem::take(&mut self.passes);
        let inside = self.walk_ray(ray, |idx, hit| {
            if hit {
                hits[idx] += 1;
            } else {
                passes[idx] += 1;
            }
        });
        self.hits = hits;
        self.passes = passes;
        inside
    }

    /// Accumulate every strip ray of `scan`. The scan timestamp must lie in the window.
    pub fn accumulate<T: Real>(&mut self, scan: &Scan, beam: &BeamModel<T>) -> Result<usize, GridError> {
        let (start, end) = self.window;
        if !(scan.timestamp >= start && scan.timestamp <= end) {
            return Err(GridError::OutsideWindow { t: scan.timestamp, start, end });
        }
        let rays = strip_project(scan, beam);
        for ray in &rays {
            self.add_ray(ray);
        }
        Ok(rays.len())
    }

    /// Cell-wise addition of another grid with identical geometry.
    pub fn merge(&mut self, other: &DensityGrid) -> Result<(), GridError> {
        if self.config != other.config || self.frame != other.frame || self.dims != other.dims {
            return Err(GridError::GeometryMismatch);
        }
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            *a += b;
        }
        for (a, b) in self.passes.iter_mut().zip(&other.passes) {
            *a += b;
        }
        self.window = (self.window.0.min(other.window.0), self.window.1.max(other.window.1));
        Ok(())
    }

    /// Clear all counts and move the grid to a new frame and window.
    pub fn reset(&mut self, frame: PlanarFrame, window: (f64, f64)) {
        self.frame = frame;
        self.window = window;
        self.hits.iter_mut().for_each(|v| *v = 0);
        self.passes.iter_mut().for_each(|v| *v = 0);
    }

    pub fn total_hits(&self) -> u64 {
        self.hits.iter().map(|&v| v as u64).sum()
    }

    pub fn total_passes(&self) -> u64 {
        self.passes.iter().map(|&v| v as u64).sum()
    }
}
