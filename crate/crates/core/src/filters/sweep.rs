use rayon::prelude::*;

use super::{dsor_from_stats, DsorParams, FilterError, NeighborStats};
use crate::eval::{ScoreCounts, Scores};
use crate::io::{Label, LidarPoint};

/// One cloud of a sweep, optionally labeled.
#[derive(Debug, Clone, Copy)]
pub struct SweepScene<'a> {
    pub cloud: &'a [LidarPoint],
    pub labels: Option<&'a [Label]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub s: f64,
    pub r: f64,
    pub kept: usize,
    pub total: usize,
    pub kept_fraction: f64,
    /// Counts pooled over all labeled scenes; `None` when no scene has labels.
    pub counts: Option<ScoreCounts>,
    pub scores: Option<Scores>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub k: usize,
    /// Sorted by `s`, then `r`.
    pub rows: Vec<SweepRow>,
    /// Row with the highest F1; the first such row on ties.
    pub best: Option<usize>,
}

/// Run DSOR for every `(s, r)` pair over every scene. Neighbor statistics are
/// computed once per scene, so the cost of a large grid is dominated by one
/// k-nearest-neighbor pass per scene.
pub fn sweep_dsor(scenes: &[SweepScene<'_>], s_values: &[f64], r_values: &[f64], k: usize) -> Result<SweepResult, FilterError> {
    if s_values.is_empty() || r_values.is_empty() {
        return Err(FilterError::InvalidParameter("sweep grid is empty".into()));
    }
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(s_values.len() * r_values.len());
    for &s in s_values {
        for &r in r_values {
            DsorParams { k, s, r }.validate()?;
            pairs.push((s, r));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    for scene in scenes {
        if let Some(labels) = scene.labels {
            if labels.len() != scene.cloud.len() {
                return Err(FilterError::InvalidParameter(format!(
                    "scene has {} points but {} labels",
                    scene.cloud.len(),
                    labels.len()
                )));
            }
        }
    }
    let stats: Vec<NeighborStats> = scenes.iter().map(|sc| NeighborStats::compute(sc.cloud, k)).collect::<Result<_, _>>()?;
    let labeled = scenes.iter().any(|sc| sc.labels.is_some());

    let rows: Vec<SweepRow> = pairs
        .par_iter()
        .map(|&(s, r)| {
            let mut kept = 0;
            let mut total = 0;
            let mut counts = ScoreCounts::default();
            for (scene, st) in scenes.iter().zip(&stats) {
                let mask = dsor_from_stats(st, scene.cloud, s, r);
                kept += mask.kept();
                total += mask.len();
                if let Some(labels) = scene.labels {
                    counts += ScoreCounts::from_mask(mask.inliers(), labels);
                }
            }
            let kept_fraction = if total == 0 { 1.0 } else { kept as f64 / total as f64 };
            let counts = labeled.then_some(counts);
            SweepRow { s, r, kept, total, kept_fraction, counts, scores: counts.map(|c| c.scores()) }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, row) in rows.iter().enumerate() {
        if let Some(f1) = row.scores.and_then(|sc| sc.f1) {
            if best.is_none_or(|(_, b)| f1 > b) {
                best = Some((i, f1));
            }
        }
    }
    Ok(SweepResult { k, rows, best: best.map(|b| b.0) })
}
