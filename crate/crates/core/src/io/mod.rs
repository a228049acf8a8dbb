//! Point clouds, scan sequences, trajectories and CSV output.

mod labels;
mod manifest;
mod pcd;
mod raw;
mod table;
mod trajectory;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::Pose;

pub use labels::{read_labels, write_labels, Label};
pub use manifest::{load_scan_sequence, load_scan_sequence_with, parse_manifest_rows, ManifestRow, ScanSequence};
pub use pcd::{read_pcd, write_pcd, PcdEncoding};
pub use raw::{read_raw_xyzi, write_raw_xyzi};
pub use table::{format_float, read_csv_table, write_atomic, write_csv, Cell, Table};
pub use trajectory::{load_trajectory, load_trajectory_with, parse_trajectory, write_trajectory, QUATERNION_TOLERANCE};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error at byte offset {offset}: {message}")]
    Parse { path: PathBuf, offset: u64, message: String },
    #[error("{path}:{line}: {message}")]
    Line { path: PathBuf, line: usize, message: String },
    #[error("{path}: manifest row {row}: {message}")]
    Manifest { path: PathBuf, row: usize, message: String },
    #[error("scan at t={t} is outside the trajectory span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },
    #[error("usage: {0}")]
    Usage(String),
    #[error("table has {header} columns but row {row} has {found}")]
    Arity { header: usize, row: usize, found: usize },
}

impl LoadError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn parse(path: &Path, offset: u64, message: impl Into<String>) -> Self {
        Self::Parse { path: path.to_path_buf(), offset, message: message.into() }
    }
}

/// One lidar return in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LidarPoint {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    /// Reflectance normalized to `[0, 1]`.
    pub intensity: f32,
    /// Seconds relative to scan start, when the format carries it.
    pub time_offset: Option<f32>,
}

impl LidarPoint {
    pub fn new(x: f32, y: f32, z: f32, intensity: f32) -> Self {
        Self { x, y, z, intensity, time_offset: None }
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }

    /// Euclidean distance to the sensor origin.
    pub fn range(&self) -> f64 {
        let [x, y, z] = self.xyz();
        (x * x + y * y + z * z).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// One lidar sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub points: Vec<LidarPoint>,
    pub timestamp: f64,
    pub sensor_pose: Pose,
}

impl Scan {
    pub fn new(points: Vec<LidarPoint>, timestamp: f64) -> Self {
        Self { points, timestamp, sensor_pose: Pose::identity() }
    }

    pub fn with_pose(mut self, pose: Pose) -> Self {
        self.sensor_pose = pose;
        self
    }
}

/// Supported point cloud encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    /// PCD v0.7, ascii or binary payload.
    Pcd,
    /// Packed little-endian `f32` records `(x, y, z, intensity)`, 16 bytes each.
    RawXyzi,
}

impl CloudFormat {
    /// Guess from the file extension: `.pcd` or `.bin`/`.xyzi`.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "pcd" => Some(Self::Pcd),
            "bin" | "xyzi" => Some(Self::RawXyzi),
            _ => None,
        }
    }
}

impl FromStr for CloudFormat {
    type Err = LoadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pcd" => Ok(Self::Pcd),
            "raw_xyzi" | "raw" | "bin" => Ok(Self::RawXyzi),
            other => Err(LoadError::Usage(format!("unknown cloud format '{other}' (expected pcd or raw_xyzi)"))),
        }
    }
}

/// How stored intensities map to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntensityScale {
    /// Divide by 255 when the field is an 8-bit integer or any value exceeds 1.
    #[default]
    Auto,
    /// Values are already in `[0, 1]`.
    Unit,
    /// Values are in `[0, 255]`.
    Byte,
}

pub(crate) fn normalize_intensity(values: &mut [f32], scale: IntensityScale, byte_typed: bool) {
    let divide = match scale {
        IntensityScale::Unit => false,
        IntensityScale::Byte => true,
        IntensityScale::Auto => byte_typed || values.iter().any(|&v| v > 1.0),
    };
    for v in values.iter_mut() {
        if divide {
            *v /= 255.0;
        }
        *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    }
}

/// Load one cloud. The returned scan has an identity pose; its timestamp is
/// `timestamp` or, when `None`, the file stem parsed as seconds.
pub fn load_pointcloud(path: impl AsRef<Path>, format: CloudFormat, timestamp: Option<f64>) -> Result<Scan, LoadError> {
    load_pointcloud_with(path, format, timestamp, IntensityScale::Auto)
}

pub fn load_pointcloud_with(
    path: impl AsRef<Path>,
    format: CloudFormat,
    timestamp: Option<f64>,
    scale: IntensityScale,
) -> Result<Scan, LoadError> {
    let path = path.as_ref();
    let timestamp = match timestamp {
        Some(t) => t,
        None => timestamp_from_filename(path)
            .ok_or_else(|| LoadError::Usage(format!("{}: no timestamp given and file stem is not a number", path.display())))?,
    };
    if !timestamp.is_finite() {
        return Err(LoadError::Usage(format!("{}: timestamp must be finite", path.display())));
    }
    let bytes = std::fs::read(path).map_err(|e| LoadError::io(path, e))?;
    let points = match format {
        CloudFormat::Pcd => read_pcd(&bytes, path, scale)?,
        CloudFormat::RawXyzi => read_raw_xyzi(&bytes, path, scale)?,
    };
    Ok(Scan::new(points, timestamp))
}

/// Write a cloud in the requested format. PCD output uses the binary encoding.
pub fn write_pointcloud(points: &[LidarPoint], path: impl AsRef<Path>, format: CloudFormat) -> Result<(), LoadError> {
    let path = path.as_ref();
    let bytes = match format {
        CloudFormat::Pcd => write_pcd(points, PcdEncoding::Binary),
        CloudFormat::RawXyzi => write_raw_xyzi(points),
    };
    write_atomic(path, &bytes)
}

fn timestamp_from_filename(path: &Path) -> Option<f64> {
    path.file_stem()?.to_str()?.parse().ok()
}
