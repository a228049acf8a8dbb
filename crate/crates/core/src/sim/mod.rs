//! Labeled synthetic snowstorm scans drawn from a known Poisson density.
//!
//! Every beam lies in the horizontal strip. Its first object is found by 2-D
//! segment intersection against the scene walls and its first snowflake is
//! sampled from the storm density under the chosen [`Exposure`] model. The
//! nearer of the two (within max range) is returned and labeled.

mod spec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::error::Error;
use crate::geometry::{yaw_of, Pose};
use crate::grid::{BeamModel, GridConfig, LatticeWalk, WindowMode};
use crate::io::{Label, LidarPoint, Scan};
use crate::visibility::{p_visibility, visibility_timeseries, VisibilityEstimate, VisibilityParams};

pub use spec::{DensitySpec, Exposure, Gust, Keyframe, LidarSpec, Region, SceneSpec, StormSpec, Wall};

pub const OBJECT_INTENSITY: f32 = 0.8;
pub const SNOW_INTENSITY: f32 = 0.05;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error("no window produced a density estimate")]
    NoEstimate,
}

/// A simulated scan with one label and one generating density per point.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScan {
    pub scan: Scan,
    pub labels: Vec<Label>,
    /// Storm density at each point's location when it was generated.
    pub lambda: Vec<f64>,
}

impl LabeledScan {
    pub fn snow_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == Label::Snow).count()
    }
}

/// Inverse survival function of the sector law: the distance `d` with
/// `exp(-λ·α·d²/2) = u`. `None` when `λ = 0`.
pub fn collision_distance_from_uniform(u: f64, lambda: f64, alpha: f64) -> Option<f64> {
    (lambda > 0.0).then(|| (-2.0 * u.ln() / (lambda * alpha)).sqrt())
}

/// Uniform draw on the open interval `(0, 1)`.
fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// First snowflake distance along a beam through constant density `lambda`.
pub fn sample_collision_distance<R: Rng>(lambda: f64, alpha: f64, rng: &mut R) -> Option<f64> {
    if lambda <= 0.0 {
        return None;
    }
    collision_distance_from_uniform(open_unit(rng), lambda, alpha)
}

/// Constant density on `[start, end)` along a beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPiece {
    pub start: f64,
    pub end: f64,
    pub lambda: f64,
}

/// First collision through piecewise constant density under the sector
/// law. Piece `i` contributes the cumulative hazard
/// `λ_i·α·(end² - start²)/2`; the distance is found by inverting the
/// piece in which the drawn exponential hazard is exceeded.
pub fn sample_piecewise_collision<R: Rng>(pieces: &[DensityPiece], alpha: f64, rng: &mut R) -> Option<f64> {
    let budget = -open_unit(rng).ln();
    piecewise_collision_for_hazard(pieces, alpha, budget)
}

fn piecewise_collision_for_hazard(pieces: &[DensityPiece], alpha: f64, budget: f64) -> Option<f64> {
    let mut used = 0.0;
    for p in pieces {
        if p.lambda <= 0.0 || p.end <= p.start {
            continue;
        }
        let k = p.lambda * alpha / 2.0;
        let piece = k * (p.end * p.end - p.start * p.start);
        if used + piece > budget {
            return Some((p.start * p.start + (budget - used) / k).sqrt());
        }
        used += piece;
    }
    None
}

/// SplitMix64 finalizer, used to derive independent per-beam seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_seed(seed: u64, scan: u64, beam: u64) -> u64 {
    mix(mix(mix(seed) ^ scan) ^ beam)
}

/// Distance along the unit ray `o + s·d` to the nearest wall.
fn first_wall(walls: &[Wall], o: [f64; 2], d: [f64; 2]) -> Option<f64> {
    let cross = |a: [f64; 2], b: [f64; 2]| a[0] * b[1] - a[1] * b[0];
    let mut best: Option<f64> = None;
    for w in walls {
        let e = [w.b[0] - w.a[0], w.b[1] - w.a[1]];
        let denom = cross(d, e);
        if denom == 0.0 {
            continue;
        }
        let ao = [w.a[0] - o[0], w.a[1] - o[1]];
        let s = cross(ao, e) / denom;
        let u = cross(ao, d) / denom;
        if s > 1e-9 && (0.0..=1.0).contains(&u) && best.is_none_or(|b| s < b) {
            best = Some(s);
        }
    }
    best
}

struct BeamContext<'a> {
    storm: &'a StormSpec,
    density: &'a DensitySpec,
    alpha: f64,
}

impl BeamContext<'_> {
    fn density(&self, p: [f64; 2]) -> f64 {
        if let Some(r) = &self.storm.region {
            if !r.contains(p) {
                return 0.0;
            }
        }
        self.density.at(p)
    }

    /// Distance of the first snowflake before `limit`, if any.
    fn snow<R: Rng>(&self, o: [f64; 2], d: [f64; 2], limit: f64, rng: &mut R) -> Option<f64> {
        if self.density.is_zero() {
            return None;
        }
        match self.storm.exposure {
            Exposure::Sector => self.sector(o, d, limit, rng),
            Exposure::Footprint { area, cell_size } => self.footprint(o, d, limit, area, cell_size, rng),
        }
    }

    fn sector<R: Rng>(&self, o: [f64; 2], d: [f64; 2], limit: f64, rng: &mut R) -> Option<f64> {
        let hit = match (self.density, &self.storm.region) {
            (DensitySpec::Constant(l), None) => sample_collision_distance(*l, self.alpha, rng),
            (DensitySpec::Constant(l), Some(region)) => {
                let (a, b) = region.clip(o, d)?;
                let piece = DensityPiece { start: a.max(0.0), end: b.min(limit), lambda: *l };
                sample_piecewise_collision(&[piece], self.alpha, rng)
            }
            (DensitySpec::Map { origin, cell_size, .. }, _) => {
                let to_lattice = |s: f64| [(o[0] + s * d[0] - origin[0]) / cell_size, (o[1] + s * d[1] - origin[1]) / cell_size];
                let pieces: Vec<DensityPiece> = LatticeWalk::new(to_lattice(0.0), to_lattice(limit))
                    .map(|step| {
                        let mid = 0.5 * (step.t_enter + step.t_exit) * limit;
                        DensityPiece {
                            start: step.t_enter * limit,
                            end: step.t_exit * limit,
                            lambda: self.density([o[0] + mid * d[0], o[1] + mid * d[1]]),
                        }
                    })
                    .collect();
                sample_piecewise_collision(&pieces, self.alpha, rng)
            }
        };
        hit.filter(|&s| s < limit)
    }

    fn footprint<R: Rng>(&self, o: [f64; 2], d: [f64; 2], limit: f64, area: f64, cell: f64, rng: &mut R) -> Option<f64> {
        let budget = -open_unit(rng).ln();
        let mut used = 0.0;
        let from = [o[0] / cell, o[1] / cell];
        let to = [(o[0] + limit * d[0]) / cell, (o[1] + limit * d[1]) / cell];
        for step in LatticeWalk::new(from, to) {
            let center = [(step.cell[0] as f64 + 0.5) * cell, (step.cell[1] as f64 + 0.5) * cell];
            used += self.density(center) * area;
            if used > budget {
                // land inside the central part of the chord so the point maps back to this cell
                let frac = 0.1 + 0.8 * rng.gen::<f64>();
                let s = (step.t_enter + frac * (step.t_exit - step.t_enter)) * limit;
                return (s > 0.0 && s < limit).then_some(s);
            }
        }
        None
    }
}

/// Simulate scan number `index` at time `t`. The result depends only on
/// `(scene, storm, index, t)`.
pub fn simulate_scan(scene: &SceneSpec, storm: &StormSpec, index: u64, t: f64) -> Result<LabeledScan, SimError> {
    scene.validate()?;
    storm.validate()?;
    let pose = scene.sensor_pose(t);
    Ok(simulate_at_pose(scene, storm, index, t, pose))
}

fn simulate_at_pose(scene: &SceneSpec, storm: &StormSpec, index: u64, t: f64, pose: Pose) -> LabeledScan {
    let lidar = &scene.lidar;
    let ctx = BeamContext { storm, density: storm.density_at_time(t), alpha: lidar.aperture };
    let o = [pose.translation.vector.x, pose.translation.vector.y];
    let yaw = yaw_of(&pose);
    let offset: f64 = ChaCha8Rng::seed_from_u64(stream_seed(storm.seed, index, u64::MAX)).gen();
    let n = lidar.beams;
    let beams: Vec<Option<(LidarPoint, Label, f64)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(storm.seed, index, j as u64));
            let azimuth = std::f64::consts::TAU * (j as f64 + offset) / n as f64;
            let (sin, cos) = (yaw + azimuth).sin_cos();
            let d = [cos, sin];
            let wall = first_wall(&scene.walls, o, d).filter(|&s| s <= lidar.max_range);
            let limit = wall.unwrap_or(lidar.max_range);
            let snow = ctx.snow(o, d, limit, &mut rng).filter(|&s| s <= lidar.max_range);
            let (range, label) = match (snow, wall) {
                (Some(s), w) if w.is_none_or(|w| s < w) => (s, Label::Snow),
                (_, Some(w)) => (w, Label::Object),
                _ => return None,
            };
            let z = rng.gen_range(-lidar.strip_half_height..=lidar.strip_half_height);
            let (ls, lc) = azimuth.sin_cos();
            let intensity = if label == Label::Snow { SNOW_INTENSITY } else { OBJECT_INTENSITY };
            let point = LidarPoint::new((range * lc) as f32, (range * ls) as f32, z as f32, intensity);
            let lambda = ctx.density([o[0] + range * d[0], o[1] + range * d[1]]);
            Some((point, label, lambda))
        })
        .collect();
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut lambda = Vec::with_capacity(n);
    for (p, l, v) in beams.into_iter().flatten() {
        points.push(p);
        labels.push(l);
        lambda.push(v);
    }
    LabeledScan { scan: Scan::new(points, t).with_pose(pose), labels, lambda }
}

/// All `scene.n_scans` scans, at `scene.scan_time(i)`.
pub fn simulate_sequence(scene: &SceneSpec, storm: &StormSpec) -> Result<Vec<LabeledScan>, SimError> {
    scene.validate()?;
    storm.validate()?;
    Ok((0..scene.n_scans)
        .map(|i| {
            let t = scene.scan_time(i);
            simulate_at_pose(scene, storm, i as u64, t, scene.sensor_pose(t))
        })
        .collect())
}

/// Settings of an estimator recovery run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    pub grid: GridConfig,
    pub beam: BeamModel<f64>,
    pub params: VisibilityParams,
    pub seed: u64,
    /// Spacing of visibility queries, seconds.
    pub step: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self { grid: GridConfig::default(), beam: BeamModel::default(), params: VisibilityParams::default(), seed: 0, step: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub lambda_star: f64,
    /// Mean of the per-window mean densities.
    pub lambda_hat: f64,
    pub v_hat: Option<f64>,
    pub v_closed_form: Option<f64>,
    pub lambda_rel_error: Option<f64>,
    pub v_rel_error: Option<f64>,
    /// Every window reported unbounded visibility.
    pub unbounded: bool,
    pub estimates: Vec<VisibilityEstimate<f64>>,
}

/// Simulate `n_scans` of a homogeneous storm of density `lambda_star` with
/// footprint exposure matched to the estimator and feed them through the
/// density grid and visibility pipeline.
pub fn end_to_end_recovery(lambda_star: f64, scene: &SceneSpec, n_scans: usize, options: &RecoveryOptions) -> Result<Recovery, Error> {
    if n_scans == 0 {
        return Err(SimError::InvalidSpec("need at least one scan".into()).into());
    }
    let storm = StormSpec::constant(lambda_star, options.seed)
        .with_exposure(Exposure::Footprint { area: options.beam.collision_area, cell_size: options.grid.cell_size });
    let scene = SceneSpec { n_scans, ..scene.clone() };
    let scans: Vec<Scan> = simulate_sequence(&scene, &storm)?.into_iter().map(|s| s.scan).collect();
    let grid = GridConfig { window_mode: WindowMode::Centered, ..options.grid };
    let estimates = visibility_timeseries(&scans, None, &grid, &options.beam, &options.params, options.step)?;
    let usable: Vec<f64> = estimates.iter().filter_map(|e| e.lambda_bar).collect();
    if usable.is_empty() {
        return Err(SimError::NoEstimate.into());
    }
    let lambda_hat = usable.iter().sum::<f64>() / usable.len() as f64;
    let alpha = options.beam.aperture;
    let p = options.params.p;
    let v_hat = p_visibility(lambda_hat, alpha, p)?.distance();
    let v_closed_form = p_visibility(lambda_star, alpha, p)?.distance();
    let rel = |est: f64, truth: f64| (est - truth).abs() / truth;
    Ok(Recovery {
        lambda_star,
        lambda_hat,
        v_hat,
        v_closed_form,
        lambda_rel_error: (lambda_star > 0.0).then(|| rel(lambda_hat, lambda_star)),
        v_rel_error: v_hat.zip(v_closed_form).map(|(a, b)| rel(a, b)),
        unbounded: estimates.iter().filter(|e| !e.status.is_gap()).all(|e| e.v_p.is_none()),
        estimates,
    })
}
