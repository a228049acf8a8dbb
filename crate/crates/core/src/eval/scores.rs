use std::ops::AddAssign;

use super::EvalError;
use crate::filters::FilterMask;
use crate::io::Label;

/// Confusion counts of snow removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScoreCounts {
    pub total: usize,
    pub total_snow: usize,
    pub removed: usize,
    pub removed_snow: usize,
}

impl ScoreCounts {
    /// Counts for inlier flags and labels of equal length.
    pub fn from_mask(inliers: &[bool], labels: &[Label]) -> Self {
        debug_assert_eq!(inliers.len(), labels.len());
        let mut c = Self { total: inliers.len(), ..Self::default() };
        for (&kept, &label) in inliers.iter().zip(labels) {
            let snow = label == Label::Snow;
            c.total_snow += snow as usize;
            if !kept {
                c.removed += 1;
                c.removed_snow += snow as usize;
            }
        }
        c
    }

    pub fn scores(&self) -> Scores {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let precision = ratio(self.removed_snow, self.removed);
        let recall = ratio(self.removed_snow, self.total_snow);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        Scores { precision, recall, f1 }
    }
}

impl AddAssign for ScoreCounts {
    fn add_assign(&mut self, o: Self) {
        self.total += o.total;
        self.total_snow += o.total_snow;
        self.removed += o.removed;
        self.removed_snow += o.removed_snow;
    }
}

/// Precision and recall of snow removal. A ratio with a zero denominator is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Scores {
    /// Removed snow over removed points.
    pub precision: Option<f64>,
    /// Removed snow over all snow points.
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub fn filter_scores(mask: &FilterMask, labels: &[Label]) -> Result<Scores, EvalError> {
    if mask.len() != labels.len() {
        return Err(EvalError::LengthMismatch { mask: mask.len(), labels: labels.len() });
    }
    Ok(ScoreCounts::from_mask(mask.inliers(), labels).scores())
}
