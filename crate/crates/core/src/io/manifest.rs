//! Scan manifests: CSV rows `timestamp,path[,pose]`.
//!
//! `path` is relative to the manifest directory; the cloud format follows the
//! extension. `pose`, when present, is `tx ty tz qx qy qz qw` separated by
//! spaces and overrides the trajectory. An optional header row whose first
//! field is not a number is skipped.

use std::path::{Path, PathBuf};

use super::{load_pointcloud_with, CloudFormat, IntensityScale, LoadError, Scan};
use crate::geometry::{pose_from_parts, Pose, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    /// 1-based row number in the manifest file.
    pub row: usize,
    pub timestamp: f64,
    pub path: PathBuf,
    pub format: CloudFormat,
    pub pose: Pose,
}

/// Scans in nondecreasing timestamp order, loaded lazily.
#[derive(Debug)]
pub struct ScanSequence {
    rows: Vec<ManifestRow>,
    next: usize,
    scale: IntensityScale,
}

impl ScanSequence {
    pub fn rows(&self) -> &[ManifestRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Load every remaining scan.
    pub fn collect_all(self) -> Result<Vec<Scan>, LoadError> {
        self.collect()
    }
}

impl Iterator for ScanSequence {
    type Item = Result<Scan, LoadError>;

    fn next(&mut self) -> Option<Self::Item> {
        let row = self.rows.get(self.next)?;
        self.next += 1;
        Some(load_pointcloud_with(&row.path, row.format, Some(row.timestamp), self.scale).map(|s| s.with_pose(row.pose)))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.rows.len() - self.next;
        (n, Some(n))
    }
}

pub fn load_scan_sequence(manifest: impl AsRef<Path>, trajectory: Option<&Trajectory>) -> Result<ScanSequence, LoadError> {
    load_scan_sequence_with(manifest, trajectory, IntensityScale::Auto)
}

/// Parse the manifest, check every cloud exists and attach poses. Rows without
/// an inline pose take the trajectory pose at their timestamp, or identity
/// when no trajectory is given.
pub fn load_scan_sequence_with(
    manifest: impl AsRef<Path>,
    trajectory: Option<&Trajectory>,
    scale: IntensityScale,
) -> Result<ScanSequence, LoadError> {
    let manifest = manifest.as_ref();
    let text = std::fs::read_to_string(manifest).map_err(|e| LoadError::io(manifest, e))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    // stable sort: rows with equal timestamps keep manifest order
    let rows = parse_manifest_rows(&text, manifest, base, trajectory)?;
    Ok(ScanSequence { rows, next: 0, scale })
}

/// Rows of manifest text, sorted by timestamp. `base` resolves relative paths.
pub fn parse_manifest_rows(
    text: &str,
    manifest: &Path,
    base: &Path,
    trajectory: Option<&Trajectory>,
) -> Result<Vec<ManifestRow>, LoadError> {
    let mut rows = parse_manifest(text, manifest, base, trajectory)?;
    rows.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Ok(rows)
}

pub(crate) fn parse_manifest(
    text: &str,
    manifest: &Path,
    base: &Path,
    trajectory: Option<&Trajectory>,
) -> Result<Vec<ManifestRow>, LoadError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let err = |message: String| LoadError::Manifest { path: manifest.to_path_buf(), row, message };
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let Ok(timestamp) = rec.get(0).unwrap_or("").parse::<f64>() else {
            if i == 0 {
                continue;
            }
            return Err(err(format!("timestamp '{}' is not a number", rec.get(0).unwrap_or(""))));
        };
        if !timestamp.is_finite() {
            return Err(err("timestamp is not finite".into()));
        }
        let rel = rec.get(1).filter(|s| !s.is_empty()).ok_or_else(|| err("missing cloud path".into()))?;
        let path = base.join(rel);
        if !path.is_file() {
            return Err(err(format!("cloud file {} does not exist", path.display())));
        }
        let format = CloudFormat::from_path(&path)
            .ok_or_else(|| err(format!("cannot infer cloud format of {} (use .pcd or .bin)", path.display())))?;
        let pose = match rec.get(2).filter(|s| !s.is_empty()) {
            Some(inline) => parse_inline_pose(inline).map_err(err)?,
            None => match trajectory {
                Some(traj) => {
                    let (start, end) = traj.span().ok_or_else(|| err("trajectory is empty".into()))?;
                    traj.pose_at(timestamp).ok_or(LoadError::OutOfSpan { t: timestamp, start, end })?
                }
                None => Pose::identity(),
            },
        };
        rows.push(ManifestRow { row, timestamp, path, format, pose });
    }
    Ok(rows)
}

fn parse_inline_pose(s: &str) -> Result<Pose, String> {
    let v: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("pose value '{t}' is not a number")))
        .collect::<Result<_, _>>()?;
    if v.len() != 7 || v.iter().any(|x| !x.is_finite()) {
        return Err("inline pose must be 7 finite numbers: tx ty tz qx qy qz qw".into());
    }
    Ok(pose_from_parts([v[0], v[1], v[2]], [v[3], v[4], v[5], v[6]]))
}
