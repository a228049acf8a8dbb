//! JSON-facing descriptions of storms and scenes.

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{planar_pose, Pose};
use crate::grid::{DEFAULT_APERTURE_DEG, DEFAULT_CELL_SIZE, DEFAULT_COLLISION_AREA, DEFAULT_STRIP_HALF_HEIGHT};

/// Snowflake density in flakes per m².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensitySpec {
    Constant(f64),
    /// Piecewise constant on square cells; `values` is row-major with `x`
    /// varying fastest, and points outside the map get `outside`.
    Map {
        origin: [f64; 2],
        cell_size: f64,
        nx: usize,
        ny: usize,
        values: Vec<f64>,
        #[serde(default)]
        outside: f64,
    },
}

impl DensitySpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let check = |v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SimError::InvalidSpec(format!("densities must be finite and nonnegative, got {v}")))
            }
        };
        match self {
            DensitySpec::Constant(v) => check(*v),
            DensitySpec::Map { origin, cell_size, nx, ny, values, outside } => {
                if !(*cell_size > 0.0 && cell_size.is_finite()) || !origin.iter().all(|v| v.is_finite()) {
                    return Err(SimError::InvalidSpec("density map needs a finite origin and positive cell size".into()));
                }
                if values.len() != nx * ny {
                    return Err(SimError::InvalidSpec(format!("density map is {nx}x{ny} but has {} values", values.len())));
                }
                values.iter().copied().chain([*outside]).try_for_each(check)
            }
        }
    }

    /// Density at a world point.
    pub fn at(&self, p: [f64; 2]) -> f64 {
        match self {
            DensitySpec::Constant(v) => *v,
            DensitySpec::Map { origin, cell_size, nx, ny, values, outside } => {
                let ix = ((p[0] - origin[0]) / cell_size).floor();
                let iy = ((p[1] - origin[1]) / cell_size).floor();
                if ix >= 0.0 && iy >= 0.0 && (ix as usize) < *nx && (iy as usize) < *ny {
                    values[iy as usize * nx + ix as usize]
                } else {
                    *outside
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DensitySpec::Constant(v) => *v == 0.0,
            DensitySpec::Map { values, outside, .. } => *outside == 0.0 && values.iter().all(|&v| v == 0.0),
        }
    }
}

/// Axis-aligned rectangle; snow exists only inside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Region {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    /// Parameter interval of `o + s·d` inside the rectangle, if any.
    pub fn clip(&self, o: [f64; 2], d: [f64; 2]) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for a in 0..2 {
            if d[a] == 0.0 {
                if o[a] < self.min[a] || o[a] > self.max[a] {
                    return None;
                }
            } else {
                let t0 = (self.min[a] - o[a]) / d[a];
                let t1 = (self.max[a] - o[a]) / d[a];
                lo = lo.max(t0.min(t1));
                hi = hi.min(t0.max(t1));
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

/// How a beam is exposed to the flakes it passes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exposure {
    /// The beam sweeps a sector of half-angle `α/2`: reaching distance `d`
    /// through constant density `λ` has probability `exp(-λ·α·d²/2)`.
    Sector,
    /// Every lattice cell the beam enters exposes a fixed collision `area`:
    /// the beam stops in a cell of density `λ` with probability
    /// `1 - exp(-λ·area)`. The lattice is aligned with the world axes.
    Footprint { area: f64, cell_size: f64 },
}

impl Default for Exposure {
    fn default() -> Self {
        Exposure::Sector
    }
}

impl Exposure {
    /// Footprint exposure matching the density estimator defaults.
    pub fn estimator_footprint() -> Self {
        Exposure::Footprint { area: DEFAULT_COLLISION_AREA, cell_size: DEFAULT_CELL_SIZE }
    }
}

/// Density override active on `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gust {
    pub start: f64,
    pub end: f64,
    pub density: DensitySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StormSpec {
    pub density: DensitySpec,
    #[serde(default)]
    pub region: Option<Region>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub exposure: Exposure,
    #[serde(default)]
    pub gusts: Vec<Gust>,
}

impl StormSpec {
    pub fn constant(lambda: f64, seed: u64) -> Self {
        Self { density: DensitySpec::Constant(lambda), region: None, seed, exposure: Exposure::Sector, gusts: Vec::new() }
    }

    pub fn with_exposure(mut self, exposure: Exposure) -> Self {
        self.exposure = exposure;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.density.validate()?;
        for g in &self.gusts {
            if !(g.start < g.end) {
                return Err(SimError::InvalidSpec(format!("gust interval [{}, {}) is empty", g.start, g.end)));
            }
            g.density.validate()?;
        }
        if let Some(r) = &self.region {
            let ok = (0..2).all(|a| r.min[a].is_finite() && r.max[a].is_finite() && r.min[a] < r.max[a]);
            if !ok {
                return Err(SimError::InvalidSpec("region must be a bounded, nonempty rectangle".into()));
            }
        }
        if let Exposure::Footprint { area, cell_size } = self.exposure {
            if !(area > 0.0 && area.is_finite() && cell_size > 0.0 && cell_size.is_finite()) {
                return Err(SimError::InvalidSpec("footprint area and cell size must be positive".into()));
            }
        }
        Ok(())
    }

    /// Density in force at time `t`: the first active gust, else the base density.
    pub fn density_at_time(&self, t: f64) -> &DensitySpec {
        self.gusts.iter().find(|g| t >= g.start && t < g.end).map(|g| &g.density).unwrap_or(&self.density)
    }
}

/// Static wall, a 2-D segment extruded over the whole strip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

/// Planar sensor pose at a time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarSpec {
    /// Beams per scan, all inside the strip.
    pub beams: usize,
    pub max_range: f64,
    /// Scans per second.
    pub spin_rate: f64,
    /// Beam aperture, radians.
    pub aperture: f64,
    pub strip_half_height: f64,
}

impl Default for LidarSpec {
    fn default() -> Self {
        Self {
            beams: 2000,
            max_range: 100.0,
            spin_rate: 10.0,
            aperture: DEFAULT_APERTURE_DEG.to_radians(),
            strip_half_height: DEFAULT_STRIP_HALF_HEIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub walls: Vec<Wall>,
    /// Sensor path; empty means static at the world origin facing `+x`.
    pub path: Vec<Keyframe>,
    pub lidar: LidarSpec,
    pub n_scans: usize,
    pub start_time: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self { walls: Vec::new(), path: Vec::new(), lidar: LidarSpec::default(), n_scans: 10, start_time: 0.0 }
    }
}

impl SceneSpec {
    pub fn open(lidar: LidarSpec, n_scans: usize) -> Self {
        Self { lidar, n_scans, ..Self::default() }
    }

    /// Axis-aligned square room of side `2·half` centered on the origin.
    pub fn room(half: f64, lidar: LidarSpec, n_scans: usize) -> Self {
        let c = [[-half, -half], [half, -half], [half, half], [-half, half]];
        let walls = (0..4).map(|i| Wall { a: c[i], b: c[(i + 1) % 4] }).collect();
        Self { walls, lidar, n_scans, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let l = &self.lidar;
        if l.beams == 0 {
            return Err(SimError::InvalidSpec("lidar needs at least one beam".into()));
        }
        for (name, v) in [("max_range", l.max_range), ("spin_rate", l.spin_rate), ("aperture", l.aperture), ("strip_half_height", l.strip_half_height)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::InvalidSpec(format!("lidar {name} must be positive and finite, got {v}")));
            }
        }
        if self.path.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(SimError::InvalidSpec("path keyframe times must be strictly increasing".into()));
        }
        if !self.start_time.is_finite() {
            return Err(SimError::InvalidSpec("start_time must be finite".into()));
        }
        Ok(())
    }

    pub fn scan_time(&self, index: usize) -> f64 {
        self.start_time + index as f64 / self.lidar.spin_rate
    }

    /// Sensor pose at `t`, interpolated between keyframes and held constant outside them.
    pub fn sensor_pose(&self, t: f64) -> Pose {
        let (x, y, yaw) = match self.path.as_slice() {
            [] => (0.0, 0.0, 0.0),
            [k] => (k.x, k.y, k.yaw),
            path => {
                let hi = path.partition_point(|k| k.t < t);
                if hi == 0 {
                    (path[0].x, path[0].y, path[0].yaw)
                } else if hi == path.len() {
                    let k = path[hi - 1];
                    (k.x, k.y, k.yaw)
                } else {
                    let (a, b) = (path[hi - 1], path[hi]);
                    let s = (t - a.t) / (b.t - a.t);
                    let dyaw = (b.yaw - a.yaw + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
                    (a.x + s * (b.x - a.x), a.y + s * (b.y - a.y), a.yaw + s * dyaw)
                }
            }
        };
        planar_pose(x, y, yaw)
    }
}
