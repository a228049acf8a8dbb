//! Rigid transforms, trajectories and the planar frame the density grid lives in.

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};

/// Sensor-to-world rigid transform.
pub type Pose = Isometry3<f64>;

/// Build a pose from a translation and a (not necessarily unit) quaternion `[x, y, z, w]`.
pub fn pose_from_parts(t: [f64; 3], q: [f64; 4]) -> Pose {
    let quat = nalgebra::Quaternion::new(q[3], q[0], q[1], q[2]);
    Isometry3::from_parts(Translation3::new(t[0], t[1], t[2]), UnitQuaternion::from_quaternion(quat))
}

/// Planar pose `(x, y, yaw)` lifted to 3-D.
pub fn planar_pose(x: f64, y: f64, yaw: f64) -> Pose {
    Isometry3::from_parts(Translation3::new(x, y, 0.0), UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw))
}

/// Heading of the sensor x axis projected on the world xy plane.
pub fn yaw_of(pose: &Pose) -> f64 {
    let x_axis = pose.rotation * Vector3::x();
    x_axis.y.atan2(x_axis.x)
}

/// Linear interpolation of translation, spherical-linear of rotation.
/// `s = 0` returns `a`, `s = 1` returns `b`, both exactly.
pub fn interpolate(a: &Pose, b: &Pose, s: f64) -> Pose {
    if s == 0.0 {
        return *a;
    }
    if s == 1.0 {
        return *b;
    }
    let t = a.translation.vector.lerp(&b.translation.vector, s);
    let r = a.rotation.slerp(&b.rotation, s);
    Isometry3::from_parts(Translation3::from(t), r)
}

/// Timestamped sequence of poses with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    stamps: Vec<f64>,
    poses: Vec<Pose>,
}

impl Trajectory {
    /// Returns `None` when timestamps are not strictly increasing or not finite,
    /// or when the two sequences differ in length.
    pub fn new(stamps: Vec<f64>, poses: Vec<Pose>) -> Option<Self> {
        if stamps.len() != poses.len() || stamps.iter().any(|t| !t.is_finite()) {
            return None;
        }
        if stamps.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        Some(Self { stamps, poses })
    }

    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }

    pub fn stamps(&self) -> &[f64] {
        &self.stamps
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &Pose)> + '_ {
        self.stamps.iter().copied().zip(self.poses.iter())
    }

    /// Time span `[first, last]`, `None` when empty.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((*self.stamps.first()?, *self.stamps.last()?))
    }

    /// Pose at `t` by bracketing interpolation. No extrapolation: `None` outside the span.
    pub fn pose_at(&self, t: f64) -> Option<Pose> {
        let (start, end) = self.span()?;
        if !(t >= start && t <= end) {
            return None;
        }
        let hi = self.stamps.partition_point(|&s| s < t);
        if self.stamps[hi] == t {
            return Some(self.poses[hi]);
        }
        let lo = hi - 1;
        let s = (t - self.stamps[lo]) / (self.stamps[hi] - self.stamps[lo]);
        Some(interpolate(&self.poses[lo], &self.poses[hi], s))
    }

    /// Index of the sample closest in time to `t`, if within `tolerance`.
    pub fn nearest(&self, t: f64, tolerance: f64) -> Option<usize> {
        if self.is_empty() {
            return None;
        }
        let hi = self.stamps.partition_point(|&s| s < t);
        let mut best: Option<(usize, f64)> = None;
        for idx in [hi.checked_sub(1), Some(hi)].into_iter().flatten() {
            if let Some(&s) = self.stamps.get(idx) {
                let dt = (s - t).abs();
                if best.is_none_or(|(_, b)| dt < b) {
                    best = Some((idx, dt));
                }
            }
        }
        best.filter(|&(_, dt)| dt <= tolerance).map(|(i, _)| i)
    }

    /// Left-multiply every pose by `transform`.
    pub fn transformed(&self, transform: &Pose) -> Self {
        Self { stamps: self.stamps.clone(), poses: self.poses.iter().map(|p| transform * p).collect() }
    }
}

/// 2-D frame `(origin, yaw)` in world coordinates. The density grid is laid
/// out in this frame so that cell assignment does not depend on how the world
/// frame is chosen around the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarFrame {
    pub origin: [f64; 2],
    pub yaw: f64,
}

impl PlanarFrame {
    pub fn new(origin: [f64; 2], yaw: f64) -> Self {
        Self { origin, yaw }
    }

    /// Frame anchored at a sensor pose: its world xy position and heading.
    pub fn from_pose(pose: &Pose) -> Self {
        let t = pose.translation.vector;
        Self { origin: [t.x, t.y], yaw: yaw_of(pose) }
    }

    pub fn to_local(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.origin[0];
        let dy = p[1] - self.origin[1];
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn to_world(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [self.origin[0] + c * p[0] - s * p[1], self.origin[1] + s * p[0] + c * p[1]]
    }
}
