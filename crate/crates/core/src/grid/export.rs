//! Density field CSV and the binary count dump.
//!
//! Dump layout, all little-endian:
//!
//! | bytes | content                                  |
//! |-------|------------------------------------------|
//! | 4     | magic `SVDG`                             |
//! | 4     | version `u32` (1)                        |
//! | 8 x 2 | frame origin x, y (`f64`)                |
//! | 8     | frame yaw (`f64`, radians)               |
//! | 8     | cell size (`f64`)                        |
//! | 8     | half extent (`f64`)                      |
//! | 8 x 2 | window start, end (`f64`)                |
//! | 4 x 2 | dims x, y (`u32`)                        |
//! | 4 x n | `h` per cell, row-major (`u32`)          |
//! | 4 x n | `m` per cell, row-major (`u32`)          |

use std::path::Path;

use super::{DensityField, DensityGrid, GridConfig, GridError};
use crate::geometry::PlanarFrame;
use crate::io::{write_atomic, Cell, LoadError, Table};
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"SVDG";
const VERSION: u32 = 1;

/// Observed cells as a table `(cell_x_index, cell_y_index, center_x, center_y, h, m, lambda)`.
pub fn field_to_table<T: Real>(field: &DensityField<T>) -> Table {
    let mut table = Table::new(["cell_x_index", "cell_y_index", "center_x", "center_y", "h", "m", "lambda"]);
    for c in field.observed() {
        table.push(vec![
            Cell::from(c.cell[0]),
            Cell::from(c.cell[1]),
            c.center[0].into(),
            c.center[1].into(),
            Cell::Int(c.h as i64),
            Cell::Int(c.m as i64),
            c.lambda.to_f64_lossy().into(),
        ]);
    }
    table
}

pub fn grid_dump_bytes(grid: &DensityGrid) -> Vec<u8> {
    let n = grid.dims();
    let mut out = Vec::with_capacity(72 + 8 * n * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let f = grid.frame();
    let c = grid.config();
    let (w0, w1) = grid.window();
    for v in [f.origin[0], f.origin[1], f.yaw, c.cell_size, c.half_extent, w0, w1] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for v in grid.hits().iter().chain(grid.passes()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_grid_dump(grid: &DensityGrid, path: impl AsRef<Path>) -> Result<(), LoadError> {
    write_atomic(path.as_ref(), &grid_dump_bytes(grid))
}

/// Read a dump back. The window mode and tau are not stored; tau is set to
/// the dumped window length and the mode to the default.
pub fn read_grid_dump(bytes: &[u8]) -> Result<DensityGrid, GridError> {
    let err = |m: &str| GridError::Dump(m.to_string());
    if bytes.len() < 72 || &bytes[..4] != MAGIC {
        return Err(err("not a density grid dump"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(GridError::Dump(format!("unsupported version {version}")));
    }
    let f = |k: usize| f64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().unwrap());
    let (ox, oy, yaw, cell_size, half_extent, w0, w1) = (f(0), f(1), f(2), f(3), f(4), f(5), f(6));
    let nx = u32::from_le_bytes(bytes[64..68].try_into().unwrap()) as usize;
    let ny = u32::from_le_bytes(bytes[68..72].try_into().unwrap()) as usize;
    let cells = nx * ny;
    if bytes.len() != 72 + 8 * cells {
        return Err(GridError::Dump(format!("payload is {} bytes, expected {}", bytes.len() - 72, 8 * cells)));
    }
    let words: Vec<u32> = bytes[72..].chunks_exact(4).map(|w| u32::from_le_bytes(w.try_into().unwrap())).collect();
    let config = GridConfig { cell_size, half_extent, window_tau: (w1 - w0).max(f64::MIN_POSITIVE), ..GridConfig::default() };
    if config.dims() != nx || nx != ny {
        return Err(err("dims do not match cell size and half extent"));
    }
    DensityGrid::from_counts(config, PlanarFrame::new([ox, oy], yaw), (w0, w1), words[..cells].to_vec(), words[cells..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{estimate_density, BeamModel, Ray2};

    fn sample_grid() -> DensityGrid {
        let config = GridConfig { cell_size: 0.1, half_extent: 1.0, ..GridConfig::default() };
        let mut grid = DensityGrid::new(config, PlanarFrame::new([3.0, -1.0], 0.3), (4.5, 5.5)).unwrap();
        grid.add_ray(&Ray2 { origin: [3.0, -1.0], end: [3.6, -0.7] });
        grid.add_ray(&Ray2 { origin: [3.0, -1.0], end: [2.5, -1.4] });
        grid
    }

    #[test]
    fn dump_round_trip() {
        let grid = sample_grid();
        let back = read_grid_dump(&grid_dump_bytes(&grid)).unwrap();
        assert_eq!(back.hits(), grid.hits());
        assert_eq!(back.passes(), grid.passes());
        assert_eq!(back.frame(), grid.frame());
        assert_eq!(back.window(), grid.window());
    }

    #[test]
    fn truncated_dump_rejected() {
        let mut bytes = grid_dump_bytes(&sample_grid());
        bytes.pop();
        assert!(read_grid_dump(&bytes).is_err());
    }

    #[test]
    fn csv_lists_observed_cells() {
        let grid = sample_grid();
        let field = estimate_density(&grid, &BeamModel::<f64>::default());
        let table = field_to_table(&field);
        let observed = grid.hits().iter().zip(grid.passes()).filter(|(h, m)| **h + **m > 0).count();
        assert_eq!(table.rows.len(), observed);
        assert_eq!(table.header.len(), 7);
    }
}
