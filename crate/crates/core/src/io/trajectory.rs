use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::{write_atomic, DatasetError};
use crate::geometry::Pose;

/// Parses `frame_index tx ty tz qw qx qy qz` lines. `#` starts a comment.
pub fn parse_trajectory(text: &str, path: &Path) -> Result<Vec<Pose>, DatasetError> {
    let mut poses = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(DatasetError::parse(path, format!("line {}: expected 8 fields, got {}", lineno + 1, fields.len())));
        }
        let frame: usize = fields[0]
            .parse()
            .map_err(|_| DatasetError::parse(path, format!("line {}: bad frame index '{}'", lineno + 1, fields[0])))?;
        let mut v = [0.0; 7];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| DatasetError::parse(path, format!("line {}: bad number '{f}'", lineno + 1)))?;
        }
        let norm = v[3..].iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(DatasetError::Data(format!("frame {frame}: zero quaternion")));
        }
        if (norm - 1.0).abs() > 1e-3 {
            log::warn!("{}: frame {frame}: quaternion norm {norm:.6}, renormalizing", path.display());
        }
        poses.push(Pose::new(frame, Vector3::new(v[0], v[1], v[2]), [v[3], v[4], v[5], v[6]]));
    }
    poses.sort_by_key(|p| p.frame_index);
    if let Some(w) = poses.windows(2).find(|w| w[0].frame_index == w[1].frame_index) {
        return Err(DatasetError::Data(format!("duplicate frame index {}", w[0].frame_index)));
    }
    Ok(poses)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<Pose>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_trajectory(&text, path)
}

pub fn format_trajectory(poses: &[Pose]) -> String {
    let mut out = String::from("# frame_index tx ty tz qw qx qy qz\n");
    for p in poses {
        let t = p.translation;
        let [w, x, y, z] = p.wxyz();
        // `{}` prints the shortest representation that round-trips exactly.
        writeln!(out, "{} {} {} {} {} {} {} {}", p.frame_index, t.x, t.y, t.z, w, x, y, z).unwrap();
    }
    out
}

pub fn write_trajectory(poses: &[Pose], path: &Path) -> Result<(), DatasetError> {
    write_atomic(path, format_trajectory(poses).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<Vec<Pose>, DatasetError> {
        parse_trajectory(s, Path::new("trajectory.txt"))
    }

    #[test]
    fn identity_line() {
        let poses = parse("0 0 0 0 1 0 0 0").unwrap();
        assert_eq!(poses, vec![Pose::identity(0)]);
    }

    #[test]
    fn duplicate_frame_rejected() {
        let err = parse("3 0 0 0 1 0 0 0\n3 1 0 0 1 0 0 0\n").unwrap_err();
        assert!(matches!(err, DatasetError::Data(_)));
    }

    #[test]
    fn sorted_and_comments_skipped() {
        let poses = parse("# header\n2 0 0 0 1 0 0 0 # trailing\n\n1 0 0 0 2 0 0 0\n").unwrap();
        assert_eq!(poses.iter().map(|p| p.frame_index).collect::<Vec<_>>(), vec![1, 2]);
        assert!((poses[0].wxyz()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse("0 0 0 0 1 0 0"), Err(DatasetError::Parse { .. })));
        assert!(matches!(parse("x 0 0 0 1 0 0 0"), Err(DatasetError::Parse { .. })));
        assert!(matches!(parse("0 0 0 0 1 0 nan 0"), Err(DatasetError::Parse { .. })));
        assert!(matches!(parse("0 0 0 0 0 0 0 0"), Err(DatasetError::Data(_))));
    }

    proptest! {
        #[test]
        fn round_trip(raw in proptest::collection::vec(
            (proptest::array::uniform3(-100.0f64..100.0), proptest::array::uniform4(-1.0f64..1.0)), 0..20)) {
            let poses: Vec<Pose> = raw
                .iter()
                .enumerate()
                .filter(|(_, (_, q))| q.iter().map(|c| c * c).sum::<f64>() > 1e-2)
                .map(|(i, (t, q))| Pose::new(i * 2, Vector3::from(*t), *q))
                .collect();
            let back = parse(&format_trajectory(&poses)).unwrap();
            prop_assert_eq!(back.len(), poses.len());
            for (a, b) in poses.iter().zip(&back) {
                prop_assert_eq!(a.frame_index, b.frame_index);
                prop_assert!((a.translation - b.translation).norm() <= 1e-9);
                prop_assert!(a.rotation.angle_to(&b.rotation) <= 1e-9);
            }
        }
    }
}
