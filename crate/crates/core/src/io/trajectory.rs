//! Trajectory text format: one pose per line, `timestamp tx ty tz qx qy qz qw`,
//! whitespace separated, `#` starts a comment line.

use std::fmt::Write as _;
use std::path::Path;

use super::{write_atomic, LoadError};
use crate::geometry::{pose_from_parts, Pose, Trajectory};

/// Default accepted deviation of an input quaternion norm from 1 before it is
/// renormalized. Text files usually carry 6 to 9 decimals.
pub const QUATERNION_TOLERANCE: f64 = 1e-3;

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory, LoadError> {
    load_trajectory_with(path, QUATERNION_TOLERANCE)
}

pub fn load_trajectory_with(path: impl AsRef<Path>, quaternion_tolerance: f64) -> Result<Trajectory, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
    parse_trajectory(&text, path, quaternion_tolerance)
}

pub fn parse_trajectory(text: &str, path: &Path, quaternion_tolerance: f64) -> Result<Trajectory, LoadError> {
    let mut stamps: Vec<f64> = Vec::new();
    let mut poses: Vec<Pose> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| LoadError::Line { path: path.to_path_buf(), line: lineno, message };
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|_| err(format!("'{tok}' is not a number"))))
            .collect::<Result<_, _>>()?;
        if fields.len() != 8 {
            return Err(err(format!("expected 8 fields (t tx ty tz qx qy qz qw), found {}", fields.len())));
        }
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite value".into()));
        }
        let t = fields[0];
        if let Some(&prev) = stamps.last() {
            if t <= prev {
                return Err(err(format!("timestamp {t} does not increase (previous {prev})")));
            }
        }
        let q = [fields[4], fields[5], fields[6], fields[7]];
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > quaternion_tolerance {
            return Err(err(format!("quaternion norm {norm} is not within {quaternion_tolerance} of 1")));
        }
        stamps.push(t);
        poses.push(pose_from_parts([fields[1], fields[2], fields[3]], q));
    }
    Ok(Trajectory::new(stamps, poses).expect("validated while parsing"))
}

pub fn write_trajectory(traj: &Trajectory, path: impl AsRef<Path>) -> Result<(), LoadError> {
    let mut out = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for (t, pose) in traj.iter() {
        let v = pose.translation.vector;
        let q = pose.rotation.quaternion();
        writeln!(out, "{t} {} {} {} {} {} {} {}", v.x, v.y, v.z, q.i, q.j, q.k, q.w).unwrap();
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Trajectory, LoadError> {
        parse_trajectory(text, Path::new("traj.txt"), QUATERNION_TOLERANCE)
    }

    #[test]
    fn single_identity_line() {
        let traj = parse("0 0 0 0 0 0 0 1").unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.stamps(), &[0.0]);
        assert_eq!(traj.poses()[0], Pose::identity());
    }

    #[test]
    fn equal_timestamps_rejected_with_line() {
        match parse("# header\n0 0 0 0 0 0 0 1\n0 1 0 0 0 0 0 1\n") {
            Err(LoadError::Line { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected monotonicity error, got {other:?}"),
        }
    }

    #[test]
    fn near_unit_quaternion_renormalized() {
        let traj = parse("0 0 0 0 0 0 0 0.999999").unwrap();
        let q = traj.poses()[0].rotation.quaternion();
        assert!((q.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nan_rejected() {
        assert!(matches!(parse("0 NaN 0 0 0 0 0 1"), Err(LoadError::Line { line: 1, .. })));
    }

    #[test]
    fn far_from_unit_quaternion_rejected() {
        assert!(parse("0 0 0 0 0 0 0 0.5").is_err());
    }
}
