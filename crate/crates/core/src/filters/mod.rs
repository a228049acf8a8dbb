//! Snow-removal filters. Every filter returns a [`FilterMask`] aligned with
//! the input cloud and never modifies the cloud itself. Ranges are measured
//! from the sensor origin of the scan, and every distance threshold is
//! inclusive (a neighbor exactly at the threshold counts).

pub mod index;
mod sweep;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::LidarPoint;
pub use index::{dist_sq, VoxelIndex};
pub use sweep::{sweep_dsor, SweepResult, SweepRow, SweepScene};

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("cloud has {n} points, need more than k = {k}")]
    TooFewPoints { n: usize, k: usize },
    #[error("invalid filter parameter: {0}")]
    InvalidParameter(String),
}

/// Inlier flags aligned with the input cloud.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FilterMask {
    inliers: Vec<bool>,
}

impl FilterMask {
    pub fn new(inliers: Vec<bool>) -> Self {
        Self { inliers }
    }

    pub fn all(n: usize) -> Self {
        Self { inliers: vec![true; n] }
    }

    pub fn len(&self) -> usize {
        self.inliers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inliers.is_empty()
    }

    pub fn inliers(&self) -> &[bool] {
        &self.inliers
    }

    pub fn is_kept(&self, i: usize) -> bool {
        self.inliers[i]
    }

    pub fn kept(&self) -> usize {
        self.inliers.iter().filter(|&&k| k).count()
    }

    pub fn removed(&self) -> usize {
        self.len() - self.kept()
    }

    pub fn kept_fraction(&self) -> f64 {
        if self.is_empty() {
            1.0
        } else {
            self.kept() as f64 / self.len() as f64
        }
    }

    /// Copy of the kept points, in input order.
    pub fn apply(&self, cloud: &[LidarPoint]) -> Vec<LidarPoint> {
        assert_eq!(cloud.len(), self.len(), "mask and cloud differ in length");
        cloud.iter().zip(&self.inliers).filter(|(_, &k)| k).map(|(p, _)| *p).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RorParams {
    pub radius: f64,
    pub min_neighbors: usize,
}

impl Default for RorParams {
    fn default() -> Self {
        Self { radius: 0.1, min_neighbors: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SorParams {
    pub k: usize,
    pub s: f64,
}

impl Default for SorParams {
    fn default() -> Self {
        Self { k: 10, s: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrorParams {
    /// Angular resolution of the sensor, radians.
    pub azimuth_res: f64,
    pub multiplier: f64,
    pub min_radius: f64,
    pub min_neighbors: usize,
}

impl Default for DrorParams {
    fn default() -> Self {
        Self { azimuth_res: 0.2f64.to_radians(), multiplier: 3.0, min_radius: 0.04, min_neighbors: 3 }
    }
}

impl DrorParams {
    /// `max(min_radius, multiplier * azimuth_res * range)`.
    pub fn search_radius(&self, range: f64) -> f64 {
        self.min_radius.max(self.multiplier * self.azimuth_res * range)
    }
}

/// DSOR parameters. `s` and `r` accept `f64::INFINITY`, which disables the
/// filter; in JSON an infinite value is written as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsorParams {
    pub k: usize,
    #[serde(with = "maybe_infinite")]
    pub s: f64,
    #[serde(with = "maybe_infinite")]
    pub r: f64,
}

mod maybe_infinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            ser.serialize_f64(*v)
        } else {
            ser.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        match Repr::deserialize(de)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Default for DsorParams {
    fn default() -> Self {
        Self { k: 5, s: 0.01, r: 0.05 }
    }
}

fn check_positive(name: &str, v: f64, allow_inf: bool) -> Result<(), FilterError> {
    let ok = v > 0.0 && (allow_inf || v.is_finite());
    if ok {
        Ok(())
    } else {
        Err(FilterError::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

impl DsorParams {
    pub fn validate(&self) -> Result<(), FilterError> {
        if self.k == 0 {
            return Err(FilterError::InvalidParameter("k must be at least 1".into()));
        }
        check_positive("s", self.s, true)?;
        check_positive("r", self.r, true)
    }
}

/// Mean distance of every point to its `k` nearest neighbors plus the global
/// mean and sample standard deviation of those means.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborStats {
    pub k: usize,
    pub mean_dist: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
}

impl NeighborStats {
    pub fn compute(cloud: &[LidarPoint], k: usize) -> Result<Self, FilterError> {
        if k == 0 {
            return Err(FilterError::InvalidParameter("k must be at least 1".into()));
        }
        if cloud.len() <= k {
            return Err(FilterError::TooFewPoints { n: cloud.len(), k });
        }
        let index = VoxelIndex::new(cloud, VoxelIndex::auto_voxel(cloud, k));
        let mean_dist: Vec<f64> = (0..cloud.len())
            .into_par_iter()
            .map(|i| mean_of_sqrt(&index.knn_dist_sq(i, k)))
            .collect();
        let (mu, sigma) = mean_and_sample_std(&mean_dist);
        Ok(Self { k, mean_dist, mu, sigma })
    }

    /// `μ + s·σ`, infinite when `s` is.
    pub fn global_threshold(&self, s: f64) -> f64 {
        if s.is_infinite() {
            f64::INFINITY
        } else {
            self.mu + s * self.sigma
        }
    }
}

/// Mean of the square roots of ascending squared distances.
pub fn mean_of_sqrt(sorted_sq: &[f64]) -> f64 {
    sorted_sq.iter().map(|d| d.sqrt()).sum::<f64>() / sorted_sq.len() as f64
}

/// Two-pass mean and sample (n - 1) standard deviation.
pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mu, 0.0);
    }
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1.0);
    (mu, var.sqrt())
}

/// Radius outlier removal: keep points with at least `min_neighbors` other
/// points within `radius`.
pub fn ror(cloud: &[LidarPoint], params: &RorParams) -> Result<FilterMask, FilterError> {
    check_positive("radius", params.radius, false)?;
    if cloud.is_empty() {
        return Ok(FilterMask::default());
    }
    let index = VoxelIndex::new(cloud, params.radius);
    let inliers = (0..cloud.len()).into_par_iter().map(|i| index.has_neighbors(i, params.radius, params.min_neighbors)).collect();
    Ok(FilterMask::new(inliers))
}

/// Statistical outlier removal: keep `p` iff `d̄_p <= μ + s·σ`.
pub fn sor(cloud: &[LidarPoint], params: &SorParams) -> Result<FilterMask, FilterError> {
    check_positive("s", params.s, true)?;
    let stats = NeighborStats::compute(cloud, params.k)?;
    Ok(sor_from_stats(&stats, params.s))
}

pub fn sor_from_stats(stats: &NeighborStats, s: f64) -> FilterMask {
    let threshold = stats.global_threshold(s);
    FilterMask::new(stats.mean_dist.iter().map(|&d| d <= threshold).collect())
}

/// Dynamic radius outlier removal: the search radius grows with range.
pub fn dror(cloud: &[LidarPoint], params: &DrorParams) -> Result<FilterMask, FilterError> {
    check_positive("azimuth_res", params.azimuth_res, false)?;
    check_positive("multiplier", params.multiplier, false)?;
    check_positive("min_radius", params.min_radius, false)?;
    if cloud.is_empty() {
        return Ok(FilterMask::default());
    }
    let ranges: Vec<f64> = cloud.iter().map(LidarPoint::range).collect();
    let mut radii: Vec<f64> = ranges.iter().map(|&r| params.search_radius(r)).collect();
    let voxel = {
        radii.sort_by(f64::total_cmp);
        radii[radii.len() / 2]
    };
    let index = VoxelIndex::new(cloud, voxel);
    let inliers = (0..cloud.len())
        .into_par_iter()
        .map(|i| index.has_neighbors(i, params.search_radius(ranges[i]), params.min_neighbors))
        .collect();
    Ok(FilterMask::new(inliers))
}

/// Dynamic statistical outlier removal: keep `p` iff
/// `d̄_p <= (μ + s·σ) · r · range(p)`.
pub fn dsor(cloud: &[LidarPoint], params: &DsorParams) -> Result<FilterMask, FilterError> {
    params.validate()?;
    if params.s.is_infinite() || params.r.is_infinite() {
        // still enforce the size precondition
        if cloud.len() <= params.k {
            return Err(FilterError::TooFewPoints { n: cloud.len(), k: params.k });
        }
        return Ok(FilterMask::all(cloud.len()));
    }
    let stats = NeighborStats::compute(cloud, params.k)?;
    Ok(dsor_from_stats(&stats, cloud, params.s, params.r))
}

pub fn dsor_from_stats(stats: &NeighborStats, cloud: &[LidarPoint], s: f64, r: f64) -> FilterMask {
    let global = stats.global_threshold(s);
    FilterMask::new(
        stats
            .mean_dist
            .iter()
            .zip(cloud)
            .map(|(&d, p)| {
                let dynamic = if global.is_infinite() || r.is_infinite() { f64::INFINITY } else { global * r * p.range() };
                d <= dynamic
            })
            .collect(),
    )
}

/// Keep `round(fraction * n)` points chosen uniformly without replacement.
pub fn random_subsample(n: usize, fraction: f64, seed: u64) -> Result<FilterMask, FilterError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(FilterError::InvalidParameter(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let keep = ((fraction * n as f64).round() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inliers = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, keep) {
        inliers[i] = true;
    }
    Ok(FilterMask::new(inliers))
}
