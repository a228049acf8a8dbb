use nalgebra::Point3;

use super::{BeamModel, DensityGrid, GridConfig, GridError, WindowMode};
use crate::geometry::{interpolate, PlanarFrame, Pose};
use crate::io::Scan;
use crate::scalar::Real;

/// 2-D segment in world coordinates, from the sensor to a measured point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray2 {
    pub origin: [f64; 2],
    pub end: [f64; 2],
}

/// Keep the points whose sensor-frame `z` lies in the closed strip
/// `[-h, h]`, drop zero-range self returns, and return one world-frame
/// ray per kept point.
pub fn strip_project<T: Real>(scan: &Scan, beam: &BeamModel<T>) -> Vec<Ray2> {
    let half = beam.strip_half_height.to_f64_lossy();
    let pose = &scan.sensor_pose;
    let o = pose.translation.vector;
    let origin = [o.x, o.y];
    scan.points
        .iter()
        .filter(|p| {
            let z = p.z as f64;
            z >= -half && z <= half && (p.x != 0.0 || p.y != 0.0 || p.z != 0.0)
        })
        .map(|p| {
            let [x, y, z] = p.xyz();
            let w = pose * Point3::new(x, y, z);
            Ray2 { origin, end: [w.x, w.y] }
        })
        .collect()
}

/// Closed time interval used for a query at `t`.
pub fn window_bounds(t: f64, tau: f64, mode: WindowMode) -> (f64, f64) {
    match mode {
        WindowMode::Centered => (t - tau / 2.0, t + tau / 2.0),
        WindowMode::Causal => (t - tau, t),
    }
}

/// Sensor pose at `t` interpolated from time-sorted scans; clamps to the
/// nearest scan outside their span.
pub fn sensor_pose_at(scans: &[Scan], t: f64) -> Option<Pose> {
    let first = scans.first()?;
    let last = scans.last()?;
    if t <= first.timestamp {
        return Some(first.sensor_pose);
    }
    if t >= last.timestamp {
        return Some(last.sensor_pose);
    }
    let hi = scans.partition_point(|s| s.timestamp < t);
    let b = &scans[hi];
    if b.timestamp == t {
        return Some(b.sensor_pose);
    }
    let a = &scans[hi - 1];
    let s = (t - a.timestamp) / (b.timestamp - a.timestamp);
    Some(interpolate(&a.sensor_pose, &b.sensor_pose, s))
}

fn scans_in(scans: &[Scan], bounds: (f64, f64)) -> &[Scan] {
    let lo = scans.partition_point(|s| s.timestamp < bounds.0);
    let hi = scans.partition_point(|s| s.timestamp <= bounds.1);
    &scans[lo..hi.max(lo)]
}

/// Density grid at time `t` from time-sorted `scans`, anchored at the sensor
/// pose at `t` (interpolated from the scans in the window).
pub fn window_field<T: Real>(scans: &[Scan], t: f64, config: &GridConfig, beam: &BeamModel<T>) -> Result<DensityGrid, GridError> {
    let bounds = window_bounds(t, config.window_tau, config.window_mode);
    let selected = scans_in(scans, bounds);
    let pose = sensor_pose_at(selected, t).ok_or(GridError::NoScans { start: bounds.0, end: bounds.1 })?;
    window_field_in_frame(scans, t, config, beam, PlanarFrame::from_pose(&pose))
}

/// Same as [`window_field`] with an explicit grid frame.
pub fn window_field_in_frame<T: Real>(
    scans: &[Scan],
    t: f64,
    config: &GridConfig,
    beam: &BeamModel<T>,
    frame: PlanarFrame,
) -> Result<DensityGrid, GridError> {
    debug_assert!(scans.windows(2).all(|w| w[0].timestamp <= w[1].timestamp), "scans must be time sorted");
    let bounds = window_bounds(t, config.window_tau, config.window_mode);
    let selected = scans_in(scans, bounds);
    if selected.is_empty() {
        return Err(GridError::NoScans { start: bounds.0, end: bounds.1 });
    }
    let mut grid = DensityGrid::new(*config, frame, bounds)?;
    let mut rays = 0;
    for scan in selected {
        rays += grid.accumulate(scan, beam)?;
    }
    if rays == 0 {
        return Err(GridError::NoStripPoints { scans: selected.len(), start: bounds.0, end: bounds.1 });
    }
    Ok(grid)
}
