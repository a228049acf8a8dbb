//! p-visibility: the distance at which the probability that a beam reaches an
//! object without hitting a snowflake drops to `p`.
//!
//! With a local mean density `λ̄` and a beam sweeping a sector of area
//! `½·d²·α`, the probability of reaching distance `d` is
//! `exp(-λ̄·d²·α/2)`, the lidar counterpart of the contrast law
//! `C = exp(-σ·r)` with `σ = λ̄` and `r = ½·d²·α`. Solving for `p` gives
//! `V_p = sqrt(-2·ln p / (λ̄·α))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{PlanarFrame, Trajectory};
use crate::grid::{estimate_density, sensor_pose_at, window_bounds, window_field_in_frame, BeamModel, DensityField, GridConfig, GridError, WindowMode};
use crate::io::{Cell, Scan, Table};
use crate::scalar::Real;

pub const DEFAULT_P: f64 = 0.5;
pub const DEFAULT_AVERAGING_RADIUS: f64 = 5.0;
/// Hit ratio above which a cell is treated as persistent structure when the
/// exclusion heuristic is enabled.
pub const PERSISTENT_HIT_RATIO: f64 = 0.95;

#[derive(Debug, Error)]
pub enum VisibilityError {
    #[error("no observed cell within {radius} m of ({x}, {y})")]
    NoObservedCells { x: f64, y: f64, radius: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no scans")]
    NoScans,
    #[error("scan stream [{scan_start}, {scan_end}] and trajectory do not overlap")]
    EmptyOverlap { scan_start: f64, scan_end: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// How cells are weighted in the local mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Weight `h + m`, the number of beams that entered the cell.
    #[default]
    Observations,
    /// Plain mean over observed cells.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisibilityParams {
    pub p: f64,
    pub averaging_radius: f64,
    pub weighting: Weighting,
    /// Exclude cells with `h / (h + m)` above this ratio; `None` keeps all cells.
    pub persistent_hit_ratio: Option<f64>,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        Self { p: DEFAULT_P, averaging_radius: DEFAULT_AVERAGING_RADIUS, weighting: Weighting::Observations, persistent_hit_ratio: None }
    }
}

/// Local mean density around a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanDensity<T> {
    pub lambda_bar: T,
    pub n_observed_cells: usize,
    pub total_weight: f64,
    /// Every contributing cell has `λ = 0`.
    pub no_snow: bool,
}

pub fn mean_density<T: Real>(field: &DensityField<T>, center: [f64; 2], radius: f64) -> Result<MeanDensity<T>, VisibilityError> {
    mean_density_with(field, center, radius, &VisibilityParams { averaging_radius: radius, ..VisibilityParams::default() })
}

/// Weighted mean of `λ_i` over observed cells whose center is within
/// `radius` of `center`.
pub fn mean_density_with<T: Real>(
    field: &DensityField<T>,
    center: [f64; 2],
    radius: f64,
    params: &VisibilityParams,
) -> Result<MeanDensity<T>, VisibilityError> {
    if !(radius > 0.0) {
        return Err(VisibilityError::Domain(format!("averaging radius must be positive, got {radius}")));
    }
    let mut cells = field.observed_within(center, radius);
    if let Some(ratio) = params.persistent_hit_ratio {
        cells.retain(|c| (c.h as f64) / ((c.h + c.m) as f64) <= ratio);
    }
    if cells.is_empty() {
        return Err(VisibilityError::NoObservedCells { x: center[0], y: center[1], radius });
    }
    let mut num = T::zero();
    let mut den = T::zero();
    let mut total_weight = 0.0;
    for c in &cells {
        let w = match params.weighting {
            Weighting::Observations => (c.h + c.m) as f64,
            Weighting::Uniform => 1.0,
        };
        num = num + T::of(w) * c.lambda;
        den = den + T::of(w);
        total_weight += w;
    }
    let no_snow = cells.iter().all(|c| c.lambda == T::zero());
    let lambda_bar = if no_snow { T::zero() } else { num / den };
    Ok(MeanDensity { lambda_bar, n_observed_cells: cells.len(), total_weight, no_snow })
}

/// Probability that a beam travels `d` meters without a collision, `exp(-λ̄·d²·α/2)`.
pub fn detection_probability<T: Real>(lambda_bar: T, alpha: T, d: T) -> T {
    let two = T::one() + T::one();
    (-lambda_bar * d * d * alpha / two).exp()
}

/// Visibility distance, or unbounded when there is no snow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PVisibility<T> {
    Bounded(T),
    Unbounded,
}

impl<T: Real> PVisibility<T> {
    pub fn distance(&self) -> Option<T> {
        match self {
            PVisibility::Bounded(v) => Some(*v),
            PVisibility::Unbounded => None,
        }
    }
}

/// `V_p = sqrt(-2·ln p / (λ̄·α))`.
pub fn p_visibility<T: Real>(lambda_bar: T, alpha: T, p: T) -> Result<PVisibility<T>, VisibilityError> {
    if !(p > T::zero() && p < T::one()) {
        return Err(VisibilityError::Domain(format!("p must be in (0, 1), got {p}")));
    }
    if !(alpha > T::zero() && alpha.is_finite()) {
        return Err(VisibilityError::Domain(format!("aperture must be positive, got {alpha}")));
    }
    if !(lambda_bar >= T::zero() && lambda_bar.is_finite()) {
        return Err(VisibilityError::Domain(format!("mean density must be finite and nonnegative, got {lambda_bar}")));
    }
    if lambda_bar == T::zero() {
        return Ok(PVisibility::Unbounded);
    }
    let two = T::one() + T::one();
    Ok(PVisibility::Bounded((-two * p.ln() / (lambda_bar * alpha)).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateStatus {
    Bounded,
    Unbounded,
    NoScans,
    NoStripPoints,
    NoObservedCells,
}

impl EstimateStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimateStatus::Bounded => "ok",
            EstimateStatus::Unbounded => "unbounded",
            EstimateStatus::NoScans => "gap_no_scans",
            EstimateStatus::NoStripPoints => "gap_no_strip_points",
            EstimateStatus::NoObservedCells => "gap_no_observed_cells",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Bounded, Self::Unbounded, Self::NoScans, Self::NoStripPoints, Self::NoObservedCells]
            .into_iter()
            .find(|v| v.as_str() == s)
    }

    pub fn is_gap(&self) -> bool {
        !matches!(self, EstimateStatus::Bounded | EstimateStatus::Unbounded)
    }
}

/// One point of a visibility time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityEstimate<T> {
    pub t: f64,
    /// `None` for gaps.
    pub lambda_bar: Option<T>,
    pub p: T,
    pub alpha: T,
    /// `None` when unbounded or a gap.
    pub v_p: Option<T>,
    pub averaging_radius: f64,
    pub n_observed_cells: usize,
    pub status: EstimateStatus,
}

impl<T: Real> VisibilityEstimate<T> {
    fn gap(t: f64, p: T, alpha: T, radius: f64, status: EstimateStatus) -> Self {
        Self { t, lambda_bar: None, p, alpha, v_p: None, averaging_radius: radius, n_observed_cells: 0, status }
    }
}

/// Estimate for one already accumulated field, centered at `center`.
pub fn estimate_from_field<T: Real>(
    field: &DensityField<T>,
    t: f64,
    center: [f64; 2],
    alpha: T,
    params: &VisibilityParams,
) -> Result<VisibilityEstimate<T>, VisibilityError> {
    let p = T::of(params.p);
    match mean_density_with(field, center, params.averaging_radius, params) {
        Ok(mean) => {
            let v = p_visibility(mean.lambda_bar, alpha, p)?;
            let status = match v {
                PVisibility::Bounded(_) => EstimateStatus::Bounded,
                PVisibility::Unbounded => EstimateStatus::Unbounded,
            };
            Ok(VisibilityEstimate {
                t,
                lambda_bar: Some(mean.lambda_bar),
                p,
                alpha,
                v_p: v.distance(),
                averaging_radius: params.averaging_radius,
                n_observed_cells: mean.n_observed_cells,
                status,
            })
        }
        Err(VisibilityError::NoObservedCells { .. }) => {
            Ok(VisibilityEstimate::gap(t, p, alpha, params.averaging_radius, EstimateStatus::NoObservedCells))
        }
        Err(e) => Err(e),
    }
}

fn estimate_at<T: Real>(
    scans: &[Scan],
    trajectory: Option<&Trajectory>,
    t: f64,
    config: &GridConfig,
    beam: &BeamModel<T>,
    params: &VisibilityParams,
) -> Result<VisibilityEstimate<T>, VisibilityError> {
    let p = T::of(params.p);
    let gap = |status| Ok(VisibilityEstimate::gap(t, p, beam.aperture, params.averaging_radius, status));
    let bounds = window_bounds(t, config.window_tau, config.window_mode);
    let pose = match trajectory {
        Some(traj) => traj.pose_at(t),
        None => {
            let lo = scans.partition_point(|s| s.timestamp < bounds.0);
            let hi = scans.partition_point(|s| s.timestamp <= bounds.1).max(lo);
            sensor_pose_at(&scans[lo..hi], t)
        }
    };
    let Some(pose) = pose else {
        return gap(EstimateStatus::NoScans);
    };
    let frame = PlanarFrame::from_pose(&pose);
    let grid = match window_field_in_frame(scans, t, config, beam, frame) {
        Ok(grid) => grid,
        Err(GridError::NoScans { .. }) => return gap(EstimateStatus::NoScans),
        Err(GridError::NoStripPoints { .. }) => return gap(EstimateStatus::NoStripPoints),
        Err(e) => return Err(e.into()),
    };
    let field = estimate_density(&grid, beam);
    estimate_from_field(&field, t, frame.origin, beam.aperture, params)
}

/// Query times `start, start + step, ...` up to `end` inclusive.
pub fn query_times(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor().max(0.0) as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

/// One estimate per `step` seconds over the span covered by both the scans
/// and the trajectory. Scans must be sorted by timestamp. Grids are anchored
/// at the trajectory pose at each query time, or at the pose interpolated
/// from the scans when no trajectory is given.
pub fn visibility_timeseries<T: Real>(
    scans: &[Scan],
    trajectory: Option<&Trajectory>,
    config: &GridConfig,
    beam: &BeamModel<T>,
    params: &VisibilityParams,
    step: f64,
) -> Result<Vec<VisibilityEstimate<T>>, VisibilityError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(VisibilityError::Domain(format!("step must be positive, got {step}")));
    }
    if !(params.p > 0.0 && params.p < 1.0) {
        return Err(VisibilityError::Domain(format!("p must be in (0, 1), got {}", params.p)));
    }
    config.validate()?;
    beam.validate()?;
    let (Some(first), Some(last)) = (scans.first(), scans.last()) else {
        return Err(VisibilityError::NoScans);
    };
    let mut start = first.timestamp;
    let mut end = last.timestamp;
    if let Some(traj) = trajectory {
        let (ts, te) = traj.span().ok_or(VisibilityError::EmptyOverlap { scan_start: start, scan_end: end })?;
        start = start.max(ts);
        end = end.min(te);
    }
    if start > end {
        return Err(VisibilityError::EmptyOverlap { scan_start: first.timestamp, scan_end: last.timestamp });
    }
    query_times(start, end, step)
        .into_par_iter()
        .map(|t| estimate_at(scans, trajectory, t, config, beam, params))
        .collect()
}

/// Online estimation with the causal window `[t - tau, t]`: scans are pushed
/// in time order and an estimate is emitted for every query time once a
/// later scan has arrived. Results equal [`visibility_timeseries`] run in
/// causal mode over the same query times.
#[derive(Debug)]
pub struct StreamingVisibility<T> {
    config: GridConfig,
    beam: BeamModel<T>,
    params: VisibilityParams,
    step: f64,
    origin_time: Option<f64>,
    next_index: usize,
    buffer: Vec<Scan>,
}

impl<T: Real> StreamingVisibility<T> {
    pub fn new(config: GridConfig, beam: BeamModel<T>, params: VisibilityParams, step: f64) -> Result<Self, VisibilityError> {
        if !(step > 0.0) {
            return Err(VisibilityError::Domain(format!("step must be positive, got {step}")));
        }
        let config = GridConfig { window_mode: WindowMode::Causal, ..config };
        config.validate()?;
        beam.validate()?;
        Ok(Self { config, beam, params, step, origin_time: None, next_index: 0, buffer: Vec::new() })
    }

    fn next_time(&self) -> Option<f64> {
        self.origin_time.map(|t0| t0 + self.next_index as f64 * self.step)
    }

    fn emit_through(&mut self, limit: f64, inclusive: bool) -> Result<Vec<VisibilityEstimate<T>>, VisibilityError> {
        let mut out = Vec::new();
        while let Some(t) = self.next_time() {
            if t > limit || (!inclusive && t == limit) {
                break;
            }
            out.push(estimate_at(&self.buffer, None, t, &self.config, &self.beam, &self.params)?);
            self.next_index += 1;
        }
        if let Some(t) = self.next_time() {
            let keep_from = t - self.config.window_tau;
            let drop = self.buffer.partition_point(|s| s.timestamp < keep_from);
            self.buffer.drain(..drop);
        }
        Ok(out)
    }

    /// Add a scan; returns the estimates that became final.
    pub fn push(&mut self, scan: Scan) -> Result<Vec<VisibilityEstimate<T>>, VisibilityError> {
        if let Some(last) = self.buffer.last() {
            if scan.timestamp < last.timestamp {
                return Err(VisibilityError::Domain(format!(
                    "scan at t={} arrived after t={}; streams must be time ordered",
                    scan.timestamp, last.timestamp
                )));
            }
        }
        if self.origin_time.is_none() {
            self.origin_time = Some(scan.timestamp);
        }
        let t = scan.timestamp;
        self.buffer.push(scan);
        self.emit_through(t, false)
    }

    /// Flush estimates up to and including the last scan time.
    pub fn finish(&mut self) -> Result<Vec<VisibilityEstimate<T>>, VisibilityError> {
        match self.buffer.last() {
            Some(last) => {
                let t = last.timestamp;
                self.emit_through(t, true)
            }
            None => Ok(Vec::new()),
        }
    }
}

/// Time series as a table `(t, lambda_bar, v_p, n_observed_cells, flag)`;
/// unbounded visibility and gaps leave `v_p` empty.
pub fn timeseries_table<T: Real>(series: &[VisibilityEstimate<T>]) -> Table {
    let mut table = Table::new(["t", "lambda_bar", "v_p", "n_observed_cells", "flag"]);
    for e in series {
        table.push(vec![
            e.t.into(),
            e.lambda_bar.map(Real::to_f64_lossy).into(),
            e.v_p.map(Real::to_f64_lossy).into(),
            Cell::from(e.n_observed_cells),
            e.status.as_str().into(),
        ]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PlanarFrame;

    fn alpha() -> f64 {
        0.085f64.to_radians()
    }

    fn field(lambda: &[f64], hits: &[u32], passes: &[u32]) -> DensityField<f64> {
        // 2x2 grid of 1 m cells centered at the origin
        DensityField::from_parts(PlanarFrame::new([0.0, 0.0], 0.0), 1.0, 1.0, 2, hits.to_vec(), passes.to_vec(), lambda.to_vec())
    }

    #[test]
    fn constant_field_mean() {
        let f = field(&[2.0; 4], &[5; 4], &[7; 4]);
        for r in [0.8, 1.0, 3.0] {
            assert_eq!(mean_density(&f, [0.0, 0.0], r).unwrap().lambda_bar, 2.0);
        }
    }

    #[test]
    fn equal_weight_mean() {
        let f = field(&[0.0, 4.0, f64::NAN, f64::NAN], &[0, 60, 0, 0], &[100, 40, 0, 0]);
        let m = mean_density(&f, [0.0, 0.0], 2.0).unwrap();
        assert_eq!(m.lambda_bar, 2.0);
        assert_eq!(m.n_observed_cells, 2);
    }

    #[test]
    fn observation_weighted_mean() {
        let f = field(&[0.0, 4.0, f64::NAN, f64::NAN], &[0, 60, 0, 0], &[300, 40, 0, 0]);
        assert_eq!(mean_density(&f, [0.0, 0.0], 2.0).unwrap().lambda_bar, 1.0);
        let uniform = VisibilityParams { weighting: Weighting::Uniform, ..VisibilityParams::default() };
        assert_eq!(mean_density_with(&f, [0.0, 0.0], 2.0, &uniform).unwrap().lambda_bar, 2.0);
    }

    #[test]
    fn no_observed_cells_is_an_error() {
        let f = field(&[f64::NAN; 4], &[0; 4], &[0; 4]);
        assert!(matches!(mean_density(&f, [0.0, 0.0], 2.0), Err(VisibilityError::NoObservedCells { .. })));
    }

    #[test]
    fn zero_field_flags_no_snow() {
        let f = field(&[0.0; 4], &[0; 4], &[9; 4]);
        let m = mean_density(&f, [0.0, 0.0], 2.0).unwrap();
        assert!(m.no_snow);
        assert_eq!(m.lambda_bar, 0.0);
    }

    #[test]
    fn persistent_cells_can_be_excluded() {
        let f = field(&[1.0, 30.0, f64::NAN, f64::NAN], &[10, 99, 0, 0], &[90, 1, 0, 0]);
        let params = VisibilityParams { persistent_hit_ratio: Some(PERSISTENT_HIT_RATIO), ..VisibilityParams::default() };
        assert_eq!(mean_density_with(&f, [0.0, 0.0], 2.0, &params).unwrap().lambda_bar, 1.0);
    }

    #[test]
    fn radius_must_be_positive() {
        let f = field(&[2.0; 4], &[5; 4], &[7; 4]);
        assert!(matches!(mean_density(&f, [0.0, 0.0], 0.0), Err(VisibilityError::Domain(_))));
    }

    #[test]
    fn probability_edge_cases() {
        assert_eq!(detection_probability(3.0, alpha(), 0.0), 1.0);
        assert_eq!(detection_probability(0.0, alpha(), 100.0), 1.0);
        let p = detection_probability(37.38, alpha(), 5.0);
        // mpmath: exp(-37.38 * 25 * alpha / 2)
        assert!((p - 0.499_983_926_015_752_2).abs() < 1e-12, "{p}");
    }

    #[test]
    fn visibility_of_calm_and_gust_fields() {
        let calm = p_visibility(0.584, alpha(), 0.5).unwrap().distance().unwrap();
        assert!((calm - 40.001_212_727_122_45).abs() < 1e-9, "{calm}");
        let gust = p_visibility(37.38, alpha(), 0.5).unwrap().distance().unwrap();
        assert!((gust - 4.999_884_052_882_63).abs() < 1e-10, "{gust}");
    }

    #[test]
    fn quadrupled_density_halves_visibility() {
        let v1 = p_visibility(1.3, alpha(), 0.5).unwrap().distance().unwrap();
        let v4 = p_visibility(5.2, alpha(), 0.5).unwrap().distance().unwrap();
        assert!((v1 / v4 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn visibility_domain() {
        assert_eq!(p_visibility(0.0, alpha(), 0.5).unwrap(), PVisibility::Unbounded);
        for p in [0.0, 1.0, -0.1, 1.5] {
            assert!(matches!(p_visibility(1.0, alpha(), p), Err(VisibilityError::Domain(_))));
        }
    }

    #[test]
    fn single_precision_visibility() {
        let v = p_visibility(0.584f32, alpha() as f32, 0.5).unwrap().distance().unwrap();
        assert!((v - 40.0012).abs() < 1e-3);
    }

    #[test]
    fn query_time_grid() {
        assert_eq!(query_times(0.0, 9.9, 1.0).len(), 10);
        assert_eq!(query_times(0.0, 10.0, 1.0).len(), 11);
        assert_eq!(query_times(2.0, 2.0, 1.0), vec![2.0]);
    }

    #[test]
    fn status_round_trip() {
        for s in [EstimateStatus::Bounded, EstimateStatus::Unbounded, EstimateStatus::NoScans, EstimateStatus::NoObservedCells] {
            assert_eq!(EstimateStatus::parse(s.as_str()), Some(s));
        }
    }
}
