//! Uniform voxel hash for radius counting and k-nearest-neighbor distances.
//!
//! Distances are compared as squared `f64` Euclidean distances computed by
//! [`dist_sq`], so results are identical to an exhaustive scan that uses the
//! same function.

use std::collections::{BinaryHeap, HashMap};

use ordered::OrdF64;

use crate::io::LidarPoint;

#[inline]
pub fn dist_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

mod ordered {
    /// Total-order wrapper for heap keys.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct OrdF64(pub f64);

    impl Eq for OrdF64 {}

    impl PartialOrd for OrdF64 {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    impl Ord for OrdF64 {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }
}

type Key = [i64; 3];

#[derive(Debug)]
pub struct VoxelIndex {
    points: Vec<[f64; 3]>,
    voxel: f64,
    cells: HashMap<Key, Vec<u32>>,
    min_key: Key,
    max_key: Key,
}

impl VoxelIndex {
    pub fn new(cloud: &[LidarPoint], voxel: f64) -> Self {
        let points: Vec<[f64; 3]> = cloud.iter().map(LidarPoint::xyz).collect();
        Self::from_xyz(points, voxel)
    }

    pub fn from_xyz(points: Vec<[f64; 3]>, voxel: f64) -> Self {
        let voxel = if voxel.is_finite() && voxel > 0.0 { voxel } else { 1.0 };
        let mut cells: HashMap<Key, Vec<u32>> = HashMap::new();
        let mut min_key = [i64::MAX; 3];
        let mut max_key = [i64::MIN; 3];
        for (i, p) in points.iter().enumerate() {
            let k = key(p, voxel);
            for a in 0..3 {
                min_key[a] = min_key[a].min(k[a]);
                max_key[a] = max_key[a].max(k[a]);
            }
            cells.entry(k).or_default().push(i as u32);
        }
        Self { points, voxel, cells, min_key, max_key }
    }

    /// Voxel edge giving roughly `per_cell` points per occupied voxel of the bounding box.
    pub fn auto_voxel(cloud: &[LidarPoint], per_cell: usize) -> f64 {
        if cloud.len() < 2 {
            return 1.0;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in cloud {
            let q = p.xyz();
            for a in 0..3 {
                lo[a] = lo[a].min(q[a]);
                hi[a] = hi[a].max(q[a]);
            }
        }
        let ext: Vec<f64> = (0..3).map(|a| (hi[a] - lo[a]).max(1e-3)).collect();
        let v = (ext[0] * ext[1] * ext[2] * per_cell.max(1) as f64 / cloud.len() as f64).cbrt();
        v.max(1e-3)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64; 3] {
        &self.points[i]
    }

    /// Whether point `i` has at least `needed` other points within `radius`.
    pub fn has_neighbors(&self, i: usize, radius: f64, needed: usize) -> bool {
        if needed == 0 {
            return true;
        }
        let p = self.points[i];
        let r2 = radius * radius;
        let lo = key(&[p[0] - radius, p[1] - radius, p[2] - radius], self.voxel);
        let hi = key(&[p[0] + radius, p[1] + radius, p[2] + radius], self.voxel);
        let span: i64 = (0..3).map(|a| (hi[a] - lo[a] + 1).max(1)).product();
        let mut count = 0;
        let mut check = |members: &Vec<u32>| {
            for &j in members {
                if j as usize != i && dist_sq(&p, &self.points[j as usize]) <= r2 {
                    count += 1;
                    if count >= needed {
                        return true;
                    }
                }
            }
            false
        };
        if span as usize > self.cells.len() {
            // the query box covers more voxels than exist: scan occupied ones
            for (k, members) in &self.cells {
                if (0..3).all(|a| k[a] >= lo[a] && k[a] <= hi[a]) && check(members) {
                    return true;
                }
            }
            return false;
        }
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    if let Some(members) = self.cells.get(&[x, y, z]) {
                        if check(members) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    /// Squared distances to the `k` nearest other points, ascending.
    /// Returns fewer than `k` values only when the cloud has fewer than `k + 1` points.
    pub fn knn_dist_sq(&self, i: usize, k: usize) -> Vec<f64> {
        if k == 0 {
            return Vec::new();
        }
        let p = self.points[i];
        let center = key(&p, self.voxel);
        let mut heap: BinaryHeap<OrdF64> = BinaryHeap::with_capacity(k + 1);
        let max_ring = (0..3)
            .map(|a| (center[a] - self.min_key[a]).max(self.max_key[a] - center[a]))
            .max()
            .unwrap_or(0);
        let consider = |members: &Vec<u32>, heap: &mut BinaryHeap<OrdF64>| {
            for &j in members {
                if j as usize == i {
                    continue;
                }
                let d = dist_sq(&p, &self.points[j as usize]);
                if heap.len() < k {
                    heap.push(OrdF64(d));
                } else if d < heap.peek().unwrap().0 {
                    heap.pop();
                    heap.push(OrdF64(d));
                }
            }
        };
        for ring in 0..=max_ring {
            let mut visit = |x: i64, y: i64, z: i64| {
                if let Some(members) = self.cells.get(&[center[0] + x, center[1] + y, center[2] + z]) {
                    consider(members, &mut heap);
                }
            };
            if ring == 0 {
                visit(0, 0, 0);
            }
            for x in -ring..=ring {
                for y in -ring..=ring {
                    if ring == 0 {
                        continue;
                    }
                    if x.abs() == ring || y.abs() == ring {
                        for z in -ring..=ring {
                            visit(x, y, z);
                        }
                    } else {
                        visit(x, y, -ring);
                        visit(x, y, ring);
                    }
                }
            }
            // points outside this ring are at least `ring * voxel` away
            if heap.len() == k {
                let reach = ring as f64 * self.voxel;
                if heap.peek().unwrap().0 < reach * reach * (1.0 - 1e-12) {
                    break;
                }
            }
        }
        let mut out: Vec<f64> = heap.into_iter().map(|v| v.0).collect();
        out.sort_by(f64::total_cmp);
        out
    }
}

fn key(p: &[f64; 3], voxel: f64) -> Key {
    [(p[0] / voxel).floor() as i64, (p[1] / voxel).floor() as i64, (p[2] / voxel).floor() as i64]
}
