//! Windowed relative pose error.
//!
//! For every ground-truth sample `t` that has a partner near `t + window`, the
//! relative motions `Δgt = gt(t)⁻¹·gt(t + w)` and `Δest = est(t)⁻¹·est(t + w)`
//! are compared through `E = Δgt⁻¹·Δest`. The translational error is
//! reported as a percentage of the ground-truth distance traveled in the
//! window. Estimated samples are matched to ground-truth stamps by nearest
//! timestamp.

use serde::{Deserialize, Serialize};

use super::{EvalError, Summary};
use crate::geometry::Trajectory;
use crate::io::{Cell, Table};

/// Distance used as the denominator of the percent error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RpeNormalizer {
    /// Length of the ground-truth path through every sample in the window.
    #[default]
    PathLength,
    /// Straight-line ground-truth displacement over the window.
    Displacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RpeOptions {
    pub window: f64,
    pub association_tolerance: f64,
    /// Windows whose ground-truth travel is below this are excluded.
    pub min_travel: f64,
    pub normalizer: RpeNormalizer,
}

impl Default for RpeOptions {
    fn default() -> Self {
        Self { window: 1.0, association_tolerance: 0.05, min_travel: 0.1, normalizer: RpeNormalizer::PathLength }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpeWindow {
    /// Window midpoint, used to pair errors with other time series.
    pub t: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Ground-truth distance used as the normalizer.
    pub travel: f64,
    pub trans_error: f64,
    pub trans_error_pct: f64,
    pub rot_error_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpeResult {
    pub windows: Vec<RpeWindow>,
    /// Windows skipped because the ground truth moved less than the floor.
    pub excluded_low_travel: usize,
    /// Windows skipped because an estimated pose was not found near an endpoint.
    pub unassociated: usize,
    /// Summary of the percent translational errors.
    pub summary: Option<Summary>,
    pub rotation_summary: Option<Summary>,
}

impl RpeResult {
    /// `(t, percent error)` pairs.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.windows.iter().map(|w| (w.t, w.trans_error_pct)).collect()
    }
}

pub fn relative_pose_error(gt: &Trajectory, est: &Trajectory, options: &RpeOptions) -> Result<RpeResult, EvalError> {
    let RpeOptions { window, association_tolerance: tol, min_travel, normalizer } = *options;
    if !(window > 0.0 && window.is_finite()) {
        return Err(EvalError::InvalidParameter(format!("window must be positive, got {window}")));
    }
    if !(tol >= 0.0) || !(min_travel >= 0.0) {
        return Err(EvalError::InvalidParameter("tolerance and travel floor must be nonnegative".into()));
    }
    let (Some((g0, g1)), Some((e0, e1))) = (gt.span(), est.span()) else {
        return Err(EvalError::NoPairs("a trajectory is empty".into()));
    };
    let overlap = g1.min(e1) - g0.max(e0);
    if overlap < window - tol {
        return Err(EvalError::InsufficientOverlap { overlap: overlap.max(0.0), window });
    }

    let stamps = gt.stamps();
    let poses = gt.poses();
    let mut windows = Vec::new();
    let mut excluded_low_travel = 0;
    let mut unassociated = 0;
    for i in 0..stamps.len() {
        let Some(j) = gt.nearest(stamps[i] + window, tol) else { continue };
        if j <= i {
            continue;
        }
        let (Some(a), Some(b)) = (est.nearest(stamps[i], tol), est.nearest(stamps[j], tol)) else {
            unassociated += 1;
            continue;
        };
        let d_gt = poses[i].inverse() * poses[j];
        let d_est = est.poses()[a].inverse() * est.poses()[b];
        let travel = match normalizer {
            RpeNormalizer::PathLength => (i..j)
                .map(|k| (poses[k + 1].translation.vector - poses[k].translation.vector).norm())
                .sum::<f64>(),
            RpeNormalizer::Displacement => d_gt.translation.vector.norm(),
        };
        if travel < min_travel {
            excluded_low_travel += 1;
            continue;
        }
        // translation of d_gt⁻¹·d_est is R_gtᵀ(t_est - t_gt), whose norm needs no rotation
        let trans_error = (d_est.translation.vector - d_gt.translation.vector).norm();
        let q = (d_gt.rotation.inverse() * d_est.rotation).into_inner();
        let rot_error = 2.0 * q.imag().norm().atan2(q.w.abs());
        windows.push(RpeWindow {
            t: 0.5 * (stamps[i] + stamps[j]),
            t_start: stamps[i],
            t_end: stamps[j],
            travel,
            trans_error,
            trans_error_pct: 100.0 * trans_error / travel,
            rot_error_deg: rot_error.to_degrees(),
        });
    }
    if windows.is_empty() {
        return Err(EvalError::NoPairs(format!(
            "no usable window ({excluded_low_travel} below the travel floor, {unassociated} without estimated poses)"
        )));
    }
    let pct: Vec<f64> = windows.iter().map(|w| w.trans_error_pct).collect();
    let rot: Vec<f64> = windows.iter().map(|w| w.rot_error_deg).collect();
    Ok(RpeResult { summary: Summary::of(&pct), rotation_summary: Summary::of(&rot), windows, excluded_low_travel, unassociated })
}

/// Per-window table `(t, t_start, t_end, travel, trans_error, trans_error_pct, rot_error_deg)`.
pub fn rpe_table(result: &RpeResult) -> Table {
    let mut table = Table::new(["t", "t_start", "t_end", "travel", "trans_error", "trans_error_pct", "rot_error_deg"]);
    for w in &result.windows {
        table.push(vec![
            Cell::from(w.t),
            w.t_start.into(),
            w.t_end.into(),
            w.travel.into(),
            w.trans_error.into(),
            w.trans_error_pct.into(),
            w.rot_error_deg.into(),
        ]);
    }
    table
}
