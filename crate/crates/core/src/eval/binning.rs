use super::{EvalError, Summary};
use crate::io::{Cell, Table};
use crate::scalar::Real;
use crate::visibility::{EstimateStatus, VisibilityEstimate};

pub const DEFAULT_BIN_WIDTH: f64 = 2.2;
pub const DEFAULT_ASSOCIATION_TOLERANCE: f64 = 0.5;

/// Visibility sample reduced to what binning needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityPoint {
    pub t: f64,
    pub v_p: Option<f64>,
    pub status: EstimateStatus,
}

impl<T: Real> From<&VisibilityEstimate<T>> for VisibilityPoint {
    fn from(e: &VisibilityEstimate<T>) -> Self {
        Self { t: e.t, v_p: e.v_p.map(Real::to_f64_lossy), status: e.status }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub summary: Option<Summary>,
}

impl Bin {
    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Error distributions per visibility bin `[k·w, (k+1)·w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedCorrelation {
    pub bin_width: f64,
    /// Contiguous from zero to the highest occupied bin; empty bins included.
    pub bins: Vec<Bin>,
    /// Samples paired with unbounded visibility.
    pub overflow_count: usize,
    pub overflow: Option<Summary>,
    /// Error samples paired with a visibility sample (bins plus overflow).
    pub paired: usize,
    /// Error samples whose nearest visibility sample was a gap.
    pub skipped_gaps: usize,
    /// Error samples with no visibility sample within the tolerance.
    pub unpaired: usize,
}

/// Pair `(t, error)` samples with the nearest visibility sample within
/// `tolerance` seconds and group them by `floor(V / bin_width)`.
pub fn bin_by_visibility(
    errors: &[(f64, f64)],
    vis: &[VisibilityPoint],
    bin_width: f64,
    tolerance: f64,
) -> Result<BinnedCorrelation, EvalError> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(EvalError::InvalidParameter(format!("bin width must be positive, got {bin_width}")));
    }
    let mut vis = vis.to_vec();
    vis.sort_by(|a, b| a.t.total_cmp(&b.t));

    let mut bounded: Vec<(usize, f64)> = Vec::new();
    let mut overflow = Vec::new();
    let mut skipped_gaps = 0;
    let mut unpaired = 0;
    for &(t, err) in errors {
        let Some(v) = nearest(&vis, t, tolerance) else {
            unpaired += 1;
            continue;
        };
        match (v.status, v.v_p) {
            (EstimateStatus::Unbounded, _) => overflow.push(err),
            (EstimateStatus::Bounded, Some(d)) => bounded.push(((d / bin_width).floor().max(0.0) as usize, err)),
            _ => skipped_gaps += 1,
        }
    }
    let paired = bounded.len() + overflow.len();
    if paired == 0 {
        return Err(EvalError::NoPairs(format!("{} error samples, {skipped_gaps} matched gaps, {unpaired} unmatched", errors.len())));
    }
    let n_bins = bounded.iter().map(|b| b.0 + 1).max().unwrap_or(0);
    let mut per_bin: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for (idx, err) in bounded {
        per_bin[idx].push(err);
    }
    let bins = per_bin
        .iter()
        .enumerate()
        .map(|(k, errs)| Bin {
            lower: k as f64 * bin_width,
            upper: (k + 1) as f64 * bin_width,
            count: errs.len(),
            summary: Summary::of(errs),
        })
        .collect();
    Ok(BinnedCorrelation {
        bin_width,
        bins,
        overflow_count: overflow.len(),
        overflow: Summary::of(&overflow),
        paired,
        skipped_gaps,
        unpaired,
    })
}

fn nearest(sorted: &[VisibilityPoint], t: f64, tolerance: f64) -> Option<&VisibilityPoint> {
    let hi = sorted.partition_point(|v| v.t < t);
    let below = hi.checked_sub(1).map(|i| &sorted[i]);
    let above = sorted.get(hi);
    let best = match (below, above) {
        (Some(a), Some(b)) => Some(if t - a.t <= b.t - t { a } else { b }),
        (a, b) => a.or(b),
    };
    best.filter(|v| (v.t - t).abs() <= tolerance)
}

/// Table `(kind, bin_lower, bin_upper, bin_center, count, median, q1, q3)`;
/// the overflow row leaves the bin edges empty.
pub fn binned_table(b: &BinnedCorrelation) -> Table {
    let mut table = Table::new(["kind", "bin_lower", "bin_upper", "bin_center", "count", "median", "q1", "q3"]);
    let stats = |s: &Option<Summary>| -> [Cell; 3] {
        match s {
            Some(s) => [s.median.into(), s.q1.into(), s.q3.into()],
            None => [Cell::Empty, Cell::Empty, Cell::Empty],
        }
    };
    for bin in &b.bins {
        let mut row = vec!["bin".into(), bin.lower.into(), bin.upper.into(), bin.center().into(), Cell::from(bin.count)];
        row.extend(stats(&bin.summary));
        table.push(row);
    }
    let mut row = vec!["overflow".into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::from(b.overflow_count)];
    row.extend(stats(&b.overflow));
    table.push(row);
    table
}
