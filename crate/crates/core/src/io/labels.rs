//! Per-frame box records: `tree cx cy cz ex ey ez score`, camera frame.
//!
//! Track files append `track_id x y w` (world BEV state) to each record.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use super::{write_atomic, DatasetError};
use crate::geometry::{Box3, Frame};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectClass {
    Tree,
}

impl ObjectClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectClass::Tree => "tree",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub class: ObjectClass,
    pub center: Point3<f64>,
    pub extents: Vector3<f64>,
    pub score: f64,
}

impl LabelRecord {
    pub fn from_box(b: &Box3, score: f64) -> Self {
        Self { class: ObjectClass::Tree, center: b.center, extents: b.extents, score }
    }

    pub fn to_box(&self, frame_index: usize) -> Box3 {
        Box3::new(self.center, self.extents, Frame::Camera(frame_index))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    pub label: LabelRecord,
    pub track_id: u64,
    /// World BEV state: x forward, y left, w diameter.
    pub state: [f64; 3],
}

fn parse_record(fields: &[&str], lineno: usize, path: &Path) -> Result<LabelRecord, DatasetError> {
    let class = match fields[0] {
        "tree" => ObjectClass::Tree,
        other => return Err(DatasetError::Data(format!("{}: line {lineno}: unknown class '{other}'", path.display()))),
    };
    let mut v = [0.0; 7];
    for (slot, f) in v.iter_mut().zip(&fields[1..8]) {
        *slot = f
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| DatasetError::parse(path, format!("line {lineno}: bad number '{f}'")))?;
    }
    if v[3..6].iter().any(|&e| e < 0.0) {
        return Err(DatasetError::Data(format!("{}: line {lineno}: negative extent", path.display())));
    }
    if !(0.0..=1.0).contains(&v[6]) {
        return Err(DatasetError::Data(format!("{}: line {lineno}: score {} outside [0, 1]", path.display(), v[6])));
    }
    Ok(LabelRecord {
        class,
        center: Point3::new(v[0], v[1], v[2]),
        extents: Vector3::new(v[3], v[4], v[5]),
        score: v[6],
    })
}

fn records<'a>(text: &'a str) -> impl Iterator<Item = (usize, Vec<&'a str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then(|| (i + 1, l.split_whitespace().collect()))
    })
}

/// Parses a label file. Track files (12 columns) are accepted; the extra
/// columns are ignored.
pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<LabelRecord>, DatasetError> {
    records(text)
        .map(|(lineno, fields)| {
            if fields.len() != 8 && fields.len() != 12 {
                return Err(DatasetError::parse(path, format!("line {lineno}: expected 8 fields, got {}", fields.len())));
            }
            parse_record(&fields, lineno, path)
        })
        .collect()
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_labels(&text, path)
}

pub fn format_labels(labels: &[LabelRecord]) -> String {
    let mut out = String::new();
    for l in labels {
        write_record(&mut out, l);
        out.push('\n');
    }
    out
}

fn write_record(out: &mut String, l: &LabelRecord) {
    let (c, e) = (l.center, l.extents);
    write!(
        out,
        "{} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
        l.class.as_str(),
        c.x,
        c.y,
        c.z,
        e.x,
        e.y,
        e.z,
        l.score
    )
    .unwrap();
}

pub fn write_labels(labels: &[LabelRecord], path: &Path) -> Result<(), DatasetError> {
    write_atomic(path, format_labels(labels).as_bytes())
}

pub fn read_track_records(path: &Path) -> Result<Vec<TrackRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    records(&text)
        .map(|(lineno, fields)| {
            if fields.len() != 12 {
                return Err(DatasetError::parse(path, format!("line {lineno}: expected 12 fields, got {}", fields.len())));
            }
            let label = parse_record(&fields, lineno, path)?;
            let track_id = fields[8]
                .parse()
                .map_err(|_| DatasetError::parse(path, format!("line {lineno}: bad track id '{}'", fields[8])))?;
            let mut state = [0.0; 3];
            for (slot, f) in state.iter_mut().zip(&fields[9..12]) {
                *slot = f.parse().map_err(|_| DatasetError::parse(path, format!("line {lineno}: bad number '{f}'")))?;
            }
            Ok(TrackRecord { label, track_id, state })
        })
        .collect()
}

pub fn write_track_records(tracks: &[TrackRecord], path: &Path) -> Result<(), DatasetError> {
    let mut out = String::new();
    for t in tracks {
        write_record(&mut out, &t.label);
        writeln!(out, " {} {:.6} {:.6} {:.6}", t.track_id, t.state[0], t.state[1], t.state[2]).unwrap();
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<Vec<LabelRecord>, DatasetError> {
        parse_labels(s, Path::new("000000.txt"))
    }

    #[test]
    fn single_record() {
        let l = parse("tree 0 1 5 0.4 3.0 0.4 1.0").unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l[0].center, Point3::new(0.0, 1.0, 5.0));
        assert_eq!(l[0].extents, Vector3::new(0.4, 3.0, 0.4));
        assert_eq!(l[0].score, 1.0);
    }

    #[test]
    fn empty_file_is_empty_set() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("\n\n").unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_records() {
        assert!(matches!(parse("tree 0 0 5 -1 1 1 1.0"), Err(DatasetError::Data(_))));
        assert!(matches!(parse("car 0 0 5 1 1 1 1.0"), Err(DatasetError::Data(_))));
        assert!(matches!(parse("tree 0 0 5 1 1 1 1.5"), Err(DatasetError::Data(_))));
        assert!(matches!(parse("tree 0 0 5 1 1 1"), Err(DatasetError::Parse { .. })));
        assert!(matches!(parse("tree 0 0 five 1 1 1 1"), Err(DatasetError::Parse { .. })));
    }

    #[test]
    fn track_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("000001.txt");
        let rec = TrackRecord {
            label: LabelRecord { class: ObjectClass::Tree, center: Point3::new(1.0, 0.5, 6.0), extents: Vector3::new(0.3, 4.0, 0.3), score: 1.0 },
            track_id: 17,
            state: [6.0, -1.0, 0.3],
        };
        write_track_records(std::slice::from_ref(&rec), &path).unwrap();
        assert_eq!(read_track_records(&path).unwrap(), vec![rec.clone()]);
        // label readers accept track files
        assert_eq!(read_labels(&path).unwrap(), vec![rec.label]);
    }

    proptest! {
        #[test]
        fn round_trip_at_six_decimals(raw in proptest::collection::vec(
            (proptest::array::uniform3(-50.0f64..50.0), proptest::array::uniform3(0.0f64..10.0), 0.0f64..=1.0), 0..30)) {
            let labels: Vec<LabelRecord> = raw.iter().map(|(c, e, s)| LabelRecord {
                class: ObjectClass::Tree,
                center: Point3::from(*c),
                extents: Vector3::from(*e),
                score: *s,
            }).collect();
            let text = format_labels(&labels);
            let back = parse(&text).unwrap();
            prop_assert_eq!(back.len(), labels.len());
            for (a, b) in labels.iter().zip(&back) {
                prop_assert!((a.center - b.center).amax() <= 5e-7);
                prop_assert!((a.extents - b.extents).amax() <= 5e-7);
                prop_assert!((a.score - b.score).abs() <= 5e-7);
            }
            // printed form is a fixed point
            prop_assert_eq!(format_labels(&back), text);
        }
    }
}
