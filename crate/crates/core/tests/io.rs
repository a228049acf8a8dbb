mod common;

use std::path::Path;

use proptest::prelude::*;
use snowvis::geometry::{planar_pose, Trajectory};
use snowvis::io::{
    load_pointcloud, load_scan_sequence, load_trajectory, parse_trajectory, read_pcd, write_csv, write_pcd, write_pointcloud,
    write_trajectory, CloudFormat, IntensityScale, LidarPoint, LoadError, PcdEncoding, Table, QUATERNION_TOLERANCE,
};

fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, bytes).unwrap();
    p
}

fn raw(points: &[[f32; 4]]) -> Vec<u8> {
    points.iter().flat_map(|p| p.iter().flat_map(|v| v.to_le_bytes())).collect()
}

#[test]
fn ascii_pcd_values_are_bit_equal_to_the_text() {
    let dir = tempfile::tempdir().unwrap();
    let text = "# .PCD v0.7\nVERSION 0.7\nFIELDS x y z intensity\nSIZE 4 4 4 4\nTYPE F F F F\nCOUNT 1 1 1 1\nWIDTH 4\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS 4\nDATA ascii\n\
0.1 0.2 0.3 0.5\n-1.25 3.5e-3 7 0\n100.123456 -0.000001 2 1\n3.3 4.4 5.5 0.25\n";
    let path = write(dir.path(), "a.pcd", text.as_bytes());
    let scan = load_pointcloud(&path, CloudFormat::Pcd, Some(1.0)).unwrap();
    let expect: [[f32; 4]; 4] = [
        ["0.1".parse().unwrap(), "0.2".parse().unwrap(), "0.3".parse().unwrap(), 0.5],
        [-1.25, "3.5e-3".parse().unwrap(), 7.0, 0.0],
        ["100.123456".parse().unwrap(), "-0.000001".parse().unwrap(), 2.0, 1.0],
        ["3.3".parse().unwrap(), "4.4".parse().unwrap(), "5.5".parse().unwrap(), 0.25],
    ];
    assert_eq!(scan.points.len(), 4);
    for (p, e) in scan.points.iter().zip(&expect) {
        assert_eq!([p.x.to_bits(), p.y.to_bits(), p.z.to_bits(), p.intensity.to_bits()], e.map(f32::to_bits));
    }
    assert_eq!(scan.timestamp, 1.0);
    assert_eq!(scan.sensor_pose, snowvis::Pose::identity());
}

#[test]
fn raw_of_32_bytes_is_two_points() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "12.5.bin", &raw(&[[1.0, 2.0, 3.0, 0.5], [-1.0, 0.0, 0.25, 0.0]]));
    let scan = load_pointcloud(&path, CloudFormat::RawXyzi, None).unwrap();
    assert_eq!(scan.points.len(), 2);
    assert_eq!(scan.timestamp, 12.5);
    assert_eq!(scan.points[1].z, 0.25);
}

#[test]
fn three_field_records_fail_at_offset_12() {
    let dir = tempfile::tempdir().unwrap();
    let bytes: Vec<u8> = [1.0f32, 2.0, 3.0].iter().flat_map(|v| v.to_le_bytes()).collect();
    let path = write(dir.path(), "c.bin", &bytes);
    match load_pointcloud(&path, CloudFormat::RawXyzi, Some(0.0)) {
        Err(LoadError::Parse { offset, .. }) => assert_eq!(offset, 12),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn unknown_format_tag_is_a_usage_error() {
    assert!(matches!("las".parse::<CloudFormat>(), Err(LoadError::Usage(_))));
}

#[test]
fn byte_intensities_are_normalized() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "b.bin", &raw(&[[1.0, 0.0, 0.0, 255.0], [1.0, 1.0, 0.0, 51.0]]));
    let scan = load_pointcloud(&path, CloudFormat::RawXyzi, Some(0.0)).unwrap();
    assert_eq!(scan.points[0].intensity, 1.0);
    assert!((scan.points[1].intensity - 0.2).abs() < 1e-7);
}

fn manifest_fixture(dir: &Path, rows: &[(f64, &str)]) -> std::path::PathBuf {
    let mut text = String::from("timestamp,path\n");
    for (t, name) in rows {
        write(dir, name, &raw(&[[1.0, 0.0, 0.0, 0.1]]));
        text.push_str(&format!("{t},{name}\n"));
    }
    write(dir, "manifest.csv", text.as_bytes())
}

#[test]
fn manifest_of_three_rows_with_identity_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest_fixture(dir.path(), &[(0.0, "a.bin"), (0.5, "b.bin"), (1.0, "c.bin")]);
    let traj = Trajectory::new(vec![0.0, 1.0], vec![snowvis::Pose::identity(); 2]).unwrap();
    let scans = load_scan_sequence(&m, Some(&traj)).unwrap().collect_all().unwrap();
    assert_eq!(scans.len(), 3);
    assert!(scans.iter().all(|s| s.sensor_pose == snowvis::Pose::identity()));
}

#[test]
fn scan_between_knots_gets_interpolated_pose() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest_fixture(dir.path(), &[(0.5, "a.bin")]);
    let traj = Trajectory::new(vec![0.0, 1.0], vec![planar_pose(0.0, 0.0, 0.0), planar_pose(2.0, 0.0, 0.0)]).unwrap();
    let scans = load_scan_sequence(&m, Some(&traj)).unwrap().collect_all().unwrap();
    assert!((scans[0].sensor_pose.translation.vector.x - 1.0).abs() < 1e-15);
}

#[test]
fn scan_after_trajectory_end_is_out_of_span() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest_fixture(dir.path(), &[(2.0, "a.bin")]);
    let traj = Trajectory::new(vec![0.0, 1.5], vec![snowvis::Pose::identity(); 2]).unwrap();
    assert!(matches!(load_scan_sequence(&m, Some(&traj)), Err(LoadError::OutOfSpan { t, .. }) if t == 2.0));
}

#[test]
fn missing_cloud_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest_fixture(dir.path(), &[(0.0, "a.bin")]);
    let mut text = std::fs::read_to_string(&m).unwrap();
    text.push_str("0.1,missing.bin\n");
    std::fs::write(&m, text).unwrap();
    match load_scan_sequence(&m, None) {
        Err(LoadError::Manifest { row, .. }) => assert_eq!(row, 3),
        other => panic!("expected a manifest error, got {other:?}"),
    }
}

#[test]
fn scans_come_out_time_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest_fixture(dir.path(), &[(3.0, "a.bin"), (1.0, "b.bin"), (2.0, "c.bin"), (0.5, "d.bin")]);
    let stamps: Vec<f64> = load_scan_sequence(&m, None).unwrap().map(|s| s.unwrap().timestamp).collect();
    assert_eq!(stamps, vec![0.5, 1.0, 2.0, 3.0]);
}

#[test]
fn trajectory_parsing_rules() {
    let p = Path::new("t.txt");
    let one = parse_trajectory("# comment\n0 0 0 0 0 0 0 1\n", p, QUATERNION_TOLERANCE).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one.poses()[0], snowvis::Pose::identity());
    assert!(matches!(parse_trajectory("0 0 0 0 0 0 0 1\n0 1 0 0 0 0 0 1\n", p, QUATERNION_TOLERANCE), Err(LoadError::Line { line: 2, .. })));
    let near = parse_trajectory("0 0 0 0 0 0 0 0.999999\n", p, QUATERNION_TOLERANCE).unwrap();
    assert!((near.poses()[0].rotation.quaternion().norm() - 1.0).abs() < 1e-15);
    assert!(parse_trajectory("0 0 NaN 0 0 0 0 1\n", p, QUATERNION_TOLERANCE).is_err());
}

#[test]
fn trajectory_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let traj = Trajectory::new(vec![0.0, 0.1, 0.2], (0..3).map(|i| planar_pose(i as f64, 0.5, 0.1 * i as f64)).collect()).unwrap();
    let path = dir.path().join("t.txt");
    write_trajectory(&traj, &path).unwrap();
    let back = load_trajectory(&path).unwrap();
    assert_eq!(back.stamps(), traj.stamps());
    for (a, b) in back.poses().iter().zip(traj.poses()) {
        assert!((a.translation.vector - b.translation.vector).norm() < 1e-12);
        assert!(a.rotation.angle_to(&b.rotation) < 1e-9);
    }
}

#[test]
fn csv_examples() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("e.csv");
    write_csv(&Table::new(["a", "b"]), &empty).unwrap();
    assert_eq!(std::fs::read_to_string(&empty).unwrap(), "a,b\n");

    let one = dir.path().join("o.csv");
    let mut t = Table::new(["a", "b"]);
    t.push(vec![1.0.into(), 2.0.into()]);
    write_csv(&t, &one).unwrap();
    assert_eq!(std::fs::read_to_string(&one).unwrap(), "a,b\n1.00000000,2.00000000\n");

    let bad = dir.path().join("bad.csv");
    let mut t = Table::new(["a", "b"]);
    t.push(vec![1.0.into()]);
    assert!(matches!(write_csv(&t, &bad), Err(LoadError::Arity { .. })));
    assert!(!bad.exists());
}

fn cloud_strategy() -> impl Strategy<Value = Vec<LidarPoint>> {
    prop::collection::vec((-100.0f32..100.0, -100.0f32..100.0, -5.0f32..5.0, 0.0f32..1.0), 0..200)
        .prop_map(|v| v.into_iter().map(|(x, y, z, i)| LidarPoint::new(x, y, z, i)).collect())
}

proptest! {
    #[test]
    fn cloud_round_trip_in_both_formats(cloud in cloud_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        for (name, format) in [("c.pcd", CloudFormat::Pcd), ("c.bin", CloudFormat::RawXyzi)] {
            let path = dir.path().join(name);
            write_pointcloud(&cloud, &path, format).unwrap();
            let back = load_pointcloud(&path, format, Some(0.0)).unwrap();
            prop_assert_eq!(back.points.len(), cloud.len());
            for (a, b) in back.points.iter().zip(&cloud) {
                prop_assert_eq!((a.x, a.y, a.z), (b.x, b.y, b.z));
            }
        }
    }

    #[test]
    fn ascii_pcd_round_trip(cloud in cloud_strategy()) {
        let bytes = write_pcd(&cloud, PcdEncoding::Ascii);
        let back = read_pcd(&bytes, Path::new("x.pcd"), IntensityScale::Unit).unwrap();
        prop_assert_eq!(back.len(), cloud.len());
        for (a, b) in back.iter().zip(&cloud) {
            prop_assert_eq!((a.x, a.y, a.z), (b.x, b.y, b.z));
        }
    }
}
