//! Minimal PLY support for xyz point clouds.
//!
//! Reads `ascii` and `binary_little_endian` files whose `vertex` element has
//! scalar `x`, `y`, `z` properties (other scalar properties are skipped).
//! Writes binary little-endian float32 xyz.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::Point3;

use super::{write_atomic, DatasetError};
use crate::geometry::{Frame, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
}

fn parse_header<R: BufRead>(r: &mut R, path: &Path) -> Result<Header, DatasetError> {
    let err = |m: &str| DatasetError::parse(path, m);
    let mut line = String::new();
    let mut read_line = |line: &mut String| -> Result<bool, DatasetError> {
        line.clear();
        let n = r.read_line(line).map_err(|e| DatasetError::io(path, e))?;
        Ok(n > 0)
    };

    if !read_line(&mut line)? || line.trim_end() != "ply" {
        return Err(err("missing 'ply' magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        if !read_line(&mut line)? {
            return Err(err("unexpected end of header"));
        }
        let mut tok = line.split_whitespace();
        match tok.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                encoding = Some(match (tok.next(), tok.next()) {
                    (Some("ascii"), Some("1.0")) => Encoding::Ascii,
                    (Some("binary_little_endian"), Some("1.0")) => Encoding::BinaryLe,
                    (Some(f), _) => return Err(err(&format!("unsupported format '{f}'"))),
                    _ => return Err(err("malformed format line")),
                });
            }
            Some("element") => {
                let name = tok.next().ok_or_else(|| err("element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| err("element without valid count"))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new() });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| err("property before element"))?;
                let ty = tok.next().ok_or_else(|| err("property without type"))?;
                if ty == "list" {
                    el.properties.push(Property::List);
                } else {
                    let ty = Scalar::parse(ty).ok_or_else(|| err(&format!("unknown property type '{ty}'")))?;
                    let name = tok.next().ok_or_else(|| err("property without name"))?;
                    el.properties.push(Property::Scalar { name: name.to_string(), ty });
                }
            }
            Some("end_header") => break,
            Some(other) => return Err(err(&format!("unexpected header keyword '{other}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| err("missing format line"))?;
    Ok(Header { encoding, elements })
}

/// Reads the xyz coordinates of the `vertex` element.
pub fn read_ply<R: Read>(reader: R, path: &Path) -> Result<Vec<Point3<f64>>, DatasetError> {
    let mut r = BufReader::new(reader);
    let header = parse_header(&mut r, path)?;
    let err = |m: &str| DatasetError::parse(path, m);

    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| err("no vertex element"))?;
    let vertex = &header.elements[vertex_pos];
    let find = |axis: &str| {
        vertex
            .properties
            .iter()
            .position(|p| matches!(p, Property::Scalar { name, .. } if name == axis))
            .ok_or_else(|| err(&format!("vertex element lacks '{axis}'")))
    };
    let axes = [find("x")?, find("y")?, find("z")?];

    let mut points = Vec::with_capacity(vertex.count.min(1 << 24));
    match header.encoding {
        Encoding::Ascii => {
            let mut lines = r.lines();
            let mut next_line = || -> Result<String, DatasetError> {
                loop {
                    match lines.next() {
                        Some(Ok(l)) if l.trim().is_empty() => continue,
                        Some(Ok(l)) => return Ok(l),
                        Some(Err(e)) => return Err(DatasetError::io(path, e)),
                        None => return Err(err("unexpected end of data")),
                    }
                }
            };
            for el in &header.elements[..vertex_pos] {
                for _ in 0..el.count {
                    next_line()?;
                }
            }
            for i in 0..vertex.count {
                let line = next_line()?;
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() < vertex.properties.len() {
                    return Err(err(&format!("vertex {i}: expected {} values", vertex.properties.len())));
                }
                let mut xyz = [0.0; 3];
                for (k, &col) in axes.iter().enumerate() {
                    xyz[k] = fields[col]
                        .parse::<f64>()
                        .map_err(|_| err(&format!("vertex {i}: bad number '{}'", fields[col])))?;
                }
                points.push(check_finite(xyz, i)?);
            }
        }
        Encoding::BinaryLe => {
            for el in &header.elements[..vertex_pos] {
                let mut size = 0;
                for p in &el.properties {
                    match p {
                        Property::Scalar { ty, .. } => size += ty.size(),
                        Property::List => return Err(err("list properties before vertex are unsupported")),
                    }
                }
                let skip = (size * el.count) as u64;
                let copied = std::io::copy(&mut (&mut r).take(skip), &mut std::io::sink())
                    .map_err(|e| DatasetError::io(path, e))?;
                if copied != skip {
                    return Err(err("unexpected end of data"));
                }
            }
            let mut layout = Vec::new();
            let mut stride = 0;
            for p in &vertex.properties {
                match p {
                    Property::Scalar { ty, .. } => {
                        layout.push((stride, *ty));
                        stride += ty.size();
                    }
                    Property::List => return Err(err("list properties in vertex are unsupported")),
                }
            }
            let mut buf = vec![0u8; stride];
            for i in 0..vertex.count {
                r.read_exact(&mut buf).map_err(|e| match e.kind() {
                    std::io::ErrorKind::UnexpectedEof => err("unexpected end of data"),
                    _ => DatasetError::io(path, e),
                })?;
                let mut xyz = [0.0; 3];
                for (k, &col) in axes.iter().enumerate() {
                    let (off, ty) = layout[col];
                    xyz[k] = ty.decode_le(&buf[off..off + ty.size()]);
                }
                points.push(check_finite(xyz, i)?);
            }
        }
    }
    Ok(points)
}

fn check_finite(xyz: [f64; 3], i: usize) -> Result<Point3<f64>, DatasetError> {
    if xyz.iter().all(|c| c.is_finite()) {
        Ok(Point3::from(xyz))
    } else {
        Err(DatasetError::Data(format!("vertex {i} has a non-finite coordinate")))
    }
}

/// Serializes points as binary little-endian float32 xyz.
pub fn write_ply<W: Write>(mut w: W, points: &[Point3<f64>]) -> std::io::Result<()> {
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        points.len()
    )?;
    let mut buf = Vec::with_capacity(points.len() * 12);
    for p in points {
        for c in p.iter() {
            buf.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)
}

pub fn read_point_cloud(path: &Path, frame: Frame) -> Result<PointCloud, DatasetError> {
    let file = std::fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    Ok(PointCloud::new(read_ply(file, path)?, frame))
}

pub fn write_point_cloud(cloud: &PointCloud, path: &Path) -> Result<(), DatasetError> {
    let mut buf = Vec::with_capacity(128 + cloud.len() * 12);
    write_ply(&mut buf, &cloud.points).map_err(|e| DatasetError::io(path, e))?;
    write_atomic(path, &buf)
}
