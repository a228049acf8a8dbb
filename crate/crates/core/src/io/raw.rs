use std::path::Path;

use super::{normalize_intensity, IntensityScale, LidarPoint, LoadError};

const RECORD: usize = 16;

/// Decode packed `(x, y, z, intensity)` little-endian `f32` records.
pub fn read_raw_xyzi(bytes: &[u8], path: &Path, scale: IntensityScale) -> Result<Vec<LidarPoint>, LoadError> {
    if bytes.len() % RECORD != 0 {
        let start = bytes.len() - bytes.len() % RECORD;
        return Err(LoadError::parse(
            path,
            bytes.len() as u64,
            format!("truncated record starting at byte {start}: {} of {RECORD} bytes", bytes.len() - start),
        ));
    }
    let mut points = Vec::with_capacity(bytes.len() / RECORD);
    let mut intensity = Vec::with_capacity(bytes.len() / RECORD);
    for (i, rec) in bytes.chunks_exact(RECORD).enumerate() {
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
        let p = LidarPoint::new(f(0), f(1), f(2), 0.0);
        if !p.is_finite() {
            return Err(LoadError::parse(path, (i * RECORD) as u64, "non-finite coordinate"));
        }
        points.push(p);
        intensity.push(f(3));
    }
    normalize_intensity(&mut intensity, scale, false);
    for (p, v) in points.iter_mut().zip(intensity) {
        p.intensity = v;
    }
    Ok(points)
}

pub fn write_raw_xyzi(points: &[LidarPoint]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * RECORD);
    for p in points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}
