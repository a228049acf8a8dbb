//! Relative pose error, visibility binning and snow-filter scores.

mod binning;
mod rpe;
mod scores;

use thiserror::Error;

pub use binning::{bin_by_visibility, binned_table, Bin, BinnedCorrelation, VisibilityPoint, DEFAULT_ASSOCIATION_TOLERANCE, DEFAULT_BIN_WIDTH};
pub use rpe::{relative_pose_error, rpe_table, RpeNormalizer, RpeOptions, RpeResult, RpeWindow};
pub use scores::{filter_scores, ScoreCounts, Scores};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trajectories overlap for {overlap} s, need at least the window of {window} s")]
    InsufficientOverlap { overlap: f64, window: f64 },
    #[error("no associable samples: {0}")]
    NoPairs(String),
    #[error("mask has {mask} entries but there are {labels} labels")]
    LengthMismatch { mask: usize, labels: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Median and quartiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl Summary {
    /// Quantiles use linear interpolation between order statistics.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            count: v.len(),
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

/// Quantile `q` of ascending `sorted`, interpolating at position `q * (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles() {
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        let s = Summary::of(&[1.0, 2.0]).unwrap();
        assert_eq!(s.median, 1.5);
        assert!(Summary::of(&[]).is_none());
    }
}
