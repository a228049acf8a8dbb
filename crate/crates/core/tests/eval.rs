mod common;

use common::Lcg;
use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use snowvis::eval::{
    bin_by_visibility, binned_table, filter_scores, relative_pose_error, EvalError, RpeNormalizer, RpeOptions, ScoreCounts,
    VisibilityPoint,
};
use snowvis::filters::FilterMask;
use snowvis::geometry::{planar_pose, Trajectory};
use snowvis::io::Label;
use snowvis::visibility::EstimateStatus;
use snowvis::Pose;

fn straight(speed: f64, seconds: f64, rate: f64) -> Trajectory {
    let n = (seconds * rate).round() as usize;
    let stamps: Vec<f64> = (0..=n).map(|i| i as f64 / rate).collect();
    let poses = stamps.iter().map(|&t| planar_pose(speed * t, 0.0, 0.0)).collect();
    Trajectory::new(stamps, poses).unwrap()
}

/// A curving path with a little roll and pitch so every axis matters.
fn wiggly(seed: u64, noise: f64) -> Trajectory {
    let mut rng = Lcg::new(seed);
    let stamps: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
    let poses = stamps
        .iter()
        .map(|&t| {
            let mut j = || noise * rng.range(-1.0, 1.0);
            let r = UnitQuaternion::from_euler_angles(0.05 * t.sin() + j(), 0.03 * t.cos() + j(), 0.3 * t + j());
            Isometry3::from_parts(Translation3::new(5.0 * t.cos() + j(), 3.0 * t + j(), 0.2 * t + j()), r)
        })
        .collect();
    Trajectory::new(stamps, poses).unwrap()
}

fn random_transform(rng: &mut Lcg) -> Pose {
    let axis = Vector3::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(-1.0, 1.0));
    let rot = UnitQuaternion::from_scaled_axis(axis.normalize() * rng.range(-3.1, 3.1));
    Isometry3::from_parts(Translation3::new(rng.range(-500.0, 500.0), rng.range(-500.0, 500.0), rng.range(-50.0, 50.0)), rot)
}

// ---------------------------------------------------------------- RPE

#[test]
fn test_identity_rpe_is_zero() {
    let gt = wiggly(1, 0.0);
    let res = relative_pose_error(&gt, &gt, &RpeOptions::default()).unwrap();
    assert!(!res.windows.is_empty());
    for w in &res.windows {
        assert_eq!(w.trans_error_pct, 0.0);
        assert!(w.rot_error_deg < 1e-12, "{w:?}");
    }
}

#[test]
fn test_one_percent_drift() {
    let res = relative_pose_error(&straight(10.0, 20.0, 10.0), &straight(10.1, 20.0, 10.0), &RpeOptions::default()).unwrap();
    assert_eq!(res.windows.len(), 191);
    for w in &res.windows {
        assert!((w.trans_error_pct - 1.0).abs() < 1e-9, "{w:?}");
        assert!((w.travel - 10.0).abs() < 1e-9);
        assert!((w.t - (w.t_start + w.t_end) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn test_rpe_is_frame_invariant() {
    let gt = wiggly(2, 0.0);
    let est = wiggly(3, 0.02);
    let base = relative_pose_error(&gt, &est, &RpeOptions::default()).unwrap();
    let mut rng = Lcg::new(4);
    for _ in 0..100 {
        let g = random_transform(&mut rng);
        let moved = relative_pose_error(&gt.transformed(&g), &est.transformed(&g), &RpeOptions::default()).unwrap();
        assert_eq!(moved.windows.len(), base.windows.len());
        for (a, b) in moved.windows.iter().zip(&base.windows) {
            assert!((a.trans_error_pct - b.trans_error_pct).abs() < 1e-6, "{} vs {}", a.trans_error_pct, b.trans_error_pct);
        }
    }
}

#[test]
fn test_standstill_windows_are_excluded() {
    let still = Trajectory::new((0..=30).map(|i| i as f64 * 0.1).collect(), vec![Pose::identity(); 31]).unwrap();
    let err = relative_pose_error(&still, &still, &RpeOptions::default()).unwrap_err();
    assert!(matches!(err, EvalError::NoPairs(_)));
}

#[test]
fn test_short_overlap_is_rejected() {
    let gt = straight(1.0, 0.5, 10.0);
    assert!(matches!(relative_pose_error(&gt, &gt, &RpeOptions::default()), Err(EvalError::InsufficientOverlap { .. })));
}

#[test]
fn test_estimate_timestamps_are_associated_within_tolerance() {
    let gt = straight(2.0, 10.0, 1.0);
    let shifted = Trajectory::new(gt.stamps().iter().map(|t| t + 0.02).collect(), gt.poses().to_vec()).unwrap();
    let res = relative_pose_error(&gt, &shifted, &RpeOptions::default()).unwrap();
    assert_eq!(res.unassociated, 0);
    assert!(res.windows.iter().all(|w| w.trans_error_pct < 1e-9));
    let far = Trajectory::new(gt.stamps().iter().map(|t| t + 0.07).collect(), gt.poses().to_vec()).unwrap();
    assert!(relative_pose_error(&gt, &far, &RpeOptions::default()).is_err());
}

#[test]
fn test_normalizers_differ_on_curves() {
    let gt = wiggly(5, 0.0);
    let est = wiggly(6, 0.01);
    let path = relative_pose_error(&gt, &est, &RpeOptions::default()).unwrap();
    let disp = relative_pose_error(&gt, &est, &RpeOptions { normalizer: RpeNormalizer::Displacement, ..RpeOptions::default() }).unwrap();
    for (a, b) in path.windows.iter().zip(&disp.windows) {
        assert_eq!(a.trans_error, b.trans_error);
        assert!(a.trans_error_pct <= b.trans_error_pct + 1e-12);
    }
}

// ---------------------------------------------------------------- binning

fn bounded(t: f64, v: f64) -> VisibilityPoint {
    VisibilityPoint { t, v_p: Some(v), status: EstimateStatus::Bounded }
}

#[test]
fn test_samples_at_3_m_land_in_the_second_bin() {
    let errors: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 0.5)).collect();
    let vis: Vec<VisibilityPoint> = (0..20).map(|i| bounded(i as f64, 3.0)).collect();
    let b = bin_by_visibility(&errors, &vis, 2.2, 0.5).unwrap();
    assert_eq!(b.bins.len(), 2);
    assert_eq!((b.bins[1].lower, b.bins[1].upper), (2.2, 4.4));
    assert_eq!(b.bins[1].count, 20);
    assert_eq!(b.bins[0].count, 0);
}

#[test]
fn test_uniform_error_gives_uniform_medians() {
    let errors: Vec<(f64, f64)> = (0..200).map(|i| (i as f64, 1.0)).collect();
    let vis: Vec<VisibilityPoint> = (0..200).map(|i| bounded(i as f64, 0.1 + i as f64 * 0.2)).collect();
    let b = bin_by_visibility(&errors, &vis, 2.2, 0.5).unwrap();
    assert!(b.bins.iter().filter_map(|bin| bin.summary).all(|s| s.median == 1.0));
}

#[test]
fn test_inverse_visibility_curve_is_reproduced() {
    let mut rng = Lcg::new(7);
    let n = 5000;
    let vis: Vec<VisibilityPoint> = (0..n).map(|i| bounded(i as f64, rng.range(1.0, 40.0))).collect();
    let errors: Vec<(f64, f64)> = vis.iter().map(|v| (v.t, 100.0 / v.v_p.unwrap())).collect();
    let b = bin_by_visibility(&errors, &vis, 2.2, 0.5).unwrap();
    for bin in b.bins.iter().filter(|b| b.count > 0 && b.lower > 0.0) {
        let median = bin.summary.unwrap().median;
        let spread = 100.0 / bin.lower.max(1.0) - 100.0 / bin.upper;
        assert!((median - 100.0 / bin.center()).abs() <= spread, "bin {} median {median}", bin.lower);
    }
}

#[test]
fn test_bins_partition_the_pairs() {
    let mut rng = Lcg::new(8);
    for _ in 0..50 {
        let n = 1 + rng.below(300);
        let vis: Vec<VisibilityPoint> = (0..n)
            .map(|i| match rng.below(6) {
                0 => VisibilityPoint { t: i as f64, v_p: None, status: EstimateStatus::Unbounded },
                1 => VisibilityPoint { t: i as f64, v_p: None, status: EstimateStatus::NoObservedCells },
                _ => bounded(i as f64, rng.range(0.0, 60.0)),
            })
            .collect();
        let errors: Vec<(f64, f64)> = (0..n).map(|i| (i as f64 + rng.range(-0.8, 0.8), rng.range(0.0, 5.0))).collect();
        let Ok(b) = bin_by_visibility(&errors, &vis, 2.2, 0.5) else { continue };
        let binned: usize = b.bins.iter().map(|x| x.count).sum();
        assert_eq!(binned + b.overflow_count, b.paired);
        assert_eq!(b.paired + b.skipped_gaps + b.unpaired, errors.len());
        for (k, bin) in b.bins.iter().enumerate() {
            assert!((bin.lower - k as f64 * 2.2).abs() < 1e-12);
            assert!((bin.upper - bin.lower - 2.2).abs() < 1e-12);
        }
    }
}

#[test]
fn test_binned_table_has_the_plot_columns() {
    let errors = vec![(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)];
    let vis = vec![bounded(0.0, 1.0), bounded(1.0, 5.0), VisibilityPoint { t: 2.0, v_p: None, status: EstimateStatus::Unbounded }];
    let b = bin_by_visibility(&errors, &vis, 2.2, 0.5).unwrap();
    let table = binned_table(&b);
    assert_eq!(table.header, ["kind", "bin_lower", "bin_upper", "bin_center", "count", "median", "q1", "q3"]);
    assert_eq!(table.rows.len(), 4);
}

#[test]
fn test_no_pairs_is_an_error() {
    let err = bin_by_visibility(&[(0.0, 1.0)], &[bounded(10.0, 3.0)], 2.2, 0.5).unwrap_err();
    assert!(matches!(err, EvalError::NoPairs(_)));
}

// ---------------------------------------------------------------- scores

fn labels_of(bits: u32, n: usize) -> Vec<Label> {
    (0..n).map(|i| if bits >> i & 1 == 1 { Label::Snow } else { Label::Object }).collect()
}

#[test]
fn test_score_examples() {
    let labels: Vec<Label> = (0..20).map(|i| if i < 10 { Label::Snow } else { Label::Object }).collect();
    let exact = FilterMask::new(labels.iter().map(|&l| l == Label::Object).collect());
    let s = filter_scores(&exact, &labels).unwrap();
    assert_eq!((s.precision, s.recall), (Some(1.0), Some(1.0)));

    let s = filter_scores(&FilterMask::all(20), &labels).unwrap();
    assert_eq!((s.precision, s.recall), (None, Some(0.0)));

    let mask = FilterMask::new((0..20).map(|i| !(i < 8 || (10..12).contains(&i))).collect());
    let s = filter_scores(&mask, &labels).unwrap();
    assert!((s.precision.unwrap() - 0.8).abs() < 1e-15 && (s.recall.unwrap() - 0.8).abs() < 1e-15);

    assert!(matches!(filter_scores(&FilterMask::all(3), &labels), Err(EvalError::LengthMismatch { mask: 3, labels: 20 })));
}

#[test]
fn test_scores_match_enumeration_on_small_clouds() {
    let n = 8;
    for label_bits in 0..(1u32 << n) {
        let labels = labels_of(label_bits, n);
        for mask_bits in 0..(1u32 << n) {
            let mask = FilterMask::new((0..n).map(|i| mask_bits >> i & 1 == 1).collect());
            let s = filter_scores(&mask, &labels).unwrap();
            let removed = (0..n).filter(|&i| mask_bits >> i & 1 == 0).count();
            let snow = (0..n).filter(|&i| label_bits >> i & 1 == 1).count();
            let hit = (0..n).filter(|&i| mask_bits >> i & 1 == 0 && label_bits >> i & 1 == 1).count();
            let p = (removed > 0).then(|| hit as f64 / removed as f64);
            let r = (snow > 0).then(|| hit as f64 / snow as f64);
            assert_eq!((s.precision, s.recall), (p, r));
            let f1 = match (p, r) {
                (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
                (Some(_), Some(_)) => Some(0.0),
                _ => None,
            };
            assert_eq!(s.f1, f1);
        }
    }
}

#[test]
fn test_scores_match_enumeration_on_random_clouds_of_100() {
    let mut rng = Lcg::new(10);
    for _ in 0..2000 {
        let n = 1 + rng.below(100);
        let labels: Vec<Label> = (0..n).map(|_| if rng.next_f64() < 0.3 { Label::Snow } else { Label::Object }).collect();
        let inliers: Vec<bool> = (0..n).map(|_| rng.next_f64() < 0.6).collect();
        let c = ScoreCounts::from_mask(&inliers, &labels);
        assert_eq!(c.total, n);
        assert_eq!(c.removed, inliers.iter().filter(|&&k| !k).count());
        assert_eq!(c.removed_snow, inliers.iter().zip(&labels).filter(|(&k, &l)| !k && l == Label::Snow).count());
        assert_eq!(c.scores(), filter_scores(&FilterMask::new(inliers), &labels).unwrap());
    }
}
