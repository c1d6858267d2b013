//! Minimal PLY support for labeled scene point clouds: ascii and
//! binary_little_endian, any scalar property types, list properties skipped.
//! Only the `vertex` element is interpreted.
//!
//! Scene metadata travels in header comments:
//!
//! ```text
//! comment scene_id room_00
//! comment class 3 chair
//! comment orientation 12 0 1
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{Point3, Vector2};

use crate::cloud::{ScenePoint, ScenePointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            other => return Err(Error::Parse(format!("unknown PLY scalar type `{other}`"))),
        })
    }
}

#[derive(Debug, Clone)]
enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropertyKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    encoding: PlyEncoding,
    comments: Vec<String>,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut offset = 0usize;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[offset..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Parse("PLY header is not terminated by end_header".into()))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| Error::Parse("PLY header is not valid UTF-8".into()))?
            .trim_end_matches('\r')
            .to_string();
        offset += nl + 1;
        let done = line.trim() == "end_header";
        lines.push(line);
        if done {
            break;
        }
    }
    if lines.first().map(|l| l.trim()) != Some("ply") {
        return Err(Error::Parse("missing `ply` magic line".into()));
    }
    let mut encoding = None;
    let mut comments = Vec::new();
    let mut elements: Vec<Element> = Vec::new();
    for line in &lines[1..lines.len() - 1] {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            None => {}
            Some("format") => {
                encoding = Some(match tokens.next() {
                    Some("ascii") => PlyEncoding::Ascii,
                    Some("binary_little_endian") => PlyEncoding::BinaryLittleEndian,
                    other => {
                        return Err(Error::Parse(format!("unsupported PLY format {other:?}")));
                    }
                });
            }
            Some("comment") => {
                let text = line.trim_start()["comment".len()..].trim().to_string();
                comments.push(text);
            }
            Some("obj_info") => {}
            Some("element") => {
                let name = tokens
                    .next()
                    .ok_or_else(|| Error::Parse("element without name".into()))?;
                let count = tokens
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("element `{name}` without a valid count")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| Error::Parse("property declared before any element".into()))?;
                let first = tokens.next().ok_or_else(|| Error::Parse("empty property".into()))?;
                let kind = if first == "list" {
                    let count = ScalarType::parse(tokens.next().unwrap_or(""))?;
                    let item = ScalarType::parse(tokens.next().unwrap_or(""))?;
                    PropertyKind::List { count, item }
                } else {
                    PropertyKind::Scalar(ScalarType::parse(first)?)
                };
                let name = tokens
                    .next()
                    .ok_or_else(|| Error::Parse("property without name".into()))?;
                element.properties.push(Property {
                    name: name.to_string(),
                    kind,
                });
            }
            Some(other) => return Err(Error::Parse(format!("unexpected PLY header keyword `{other}`"))),
        }
    }
    Ok(Header {
        encoding: encoding.ok_or_else(|| Error::Parse("missing PLY format line".into()))?,
        comments,
        elements,
        body_offset: offset,
    })
}

trait ValueSource {
    fn next_value(&mut self, ty: ScalarType) -> Result<f64>;
}

struct AsciiSource<'a> {
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl ValueSource for AsciiSource<'_> {
    fn next_value(&mut self, ty: ScalarType) -> Result<f64> {
        let token = self
            .tokens
            .next()
            .ok_or_else(|| Error::Parse("PLY body ended early".into()))?;
        let bad = || Error::Parse(format!("invalid PLY value `{token}`"));
        Ok(match ty {
            ScalarType::F32 => token.parse::<f32>().map_err(|_| bad())? as f64,
            ScalarType::F64 => token.parse::<f64>().map_err(|_| bad())?,
            _ => token.parse::<i64>().map_err(|_| bad())? as f64,
        })
    }
}

struct BinarySource<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BinarySource<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Parse("PLY body ended early".into()))?;
        self.pos = end;
        Ok(slice.try_into().expect("slice of length N"))
    }
}

impl ValueSource for BinarySource<'_> {
    fn next_value(&mut self, ty: ScalarType) -> Result<f64> {
        Ok(match ty {
            ScalarType::I8 => i8::from_le_bytes(self.take()?) as f64,
            ScalarType::U8 => u8::from_le_bytes(self.take()?) as f64,
            ScalarType::I16 => i16::from_le_bytes(self.take()?) as f64,
            ScalarType::U16 => u16::from_le_bytes(self.take()?) as f64,
            ScalarType::I32 => i32::from_le_bytes(self.take()?) as f64,
            ScalarType::U32 => u32::from_le_bytes(self.take()?) as f64,
            ScalarType::F32 => f32::from_le_bytes(self.take()?) as f64,
            ScalarType::F64 => f64::from_le_bytes(self.take()?),
        })
    }
}

fn read_records(source: &mut dyn ValueSource, header: &Header) -> Result<Option<(Element, Vec<Vec<f64>>)>> {
    let mut vertex = None;
    for element in &header.elements {
        let keep = element.name == "vertex";
        let mut rows = Vec::with_capacity(if keep { element.count } else { 0 });
        for _ in 0..element.count {
            let mut row = Vec::with_capacity(element.properties.len());
            for prop in &element.properties {
                match prop.kind {
                    PropertyKind::Scalar(ty) => row.push(source.next_value(ty)?),
                    PropertyKind::List { count, item } => {
                        let n = source.next_value(count)?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(Error::Parse(format!("invalid list length {n}")));
                        }
                        for _ in 0..n as usize {
                            source.next_value(item)?;
                        }
                        row.push(f64::NAN);
                    }
                }
            }
            if keep {
                rows.push(row);
            }
        }
        if keep {
            vertex = Some((element.clone(), rows));
        }
    }
    Ok(vertex)
}

fn label_value(v: f64, what: &str) -> Result<u32> {
    if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
        return Err(Error::Schema(format!("{what} value {v} is not a non-negative integer")));
    }
    Ok(v as u32)
}

/// Parses a labeled PLY scene. `fallback_id` names the scene when the header
/// carries no `scene_id` comment.
pub fn parse_scene(bytes: &[u8], fallback_id: &str) -> Result<ScenePointCloud> {
    let header = parse_header(bytes)?;
    let body = &bytes[header.body_offset..];
    let parsed = match header.encoding {
        PlyEncoding::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| Error::Parse("ascii PLY body is not UTF-8".into()))?;
            read_records(
                &mut AsciiSource {
                    tokens: text.split_ascii_whitespace(),
                },
                &header,
            )?
        }
        PlyEncoding::BinaryLittleEndian => read_records(&mut BinarySource { bytes: body, pos: 0 }, &header)?,
    };
    let (element, rows) = parsed.ok_or_else(|| Error::Schema("PLY has no vertex element".into()))?;

    let column = |name: &str| element.properties.iter().position(|p| p.name == name);
    let require = |name: &str| column(name).ok_or_else(|| Error::Schema(format!("vertex property `{name}` is missing")));
    let (x, y, z) = (require("x")?, require("y")?, require("z")?);
    let semantic = require("semantic_label")?;
    let instance = require("instance_label")?;
    let rgb = [column("red"), column("green"), column("blue")];

    let mut points = Vec::with_capacity(rows.len());
    for row in &rows {
        let mut color = [0u8; 3];
        for (c, col) in color.iter_mut().zip(rgb) {
            if let Some(col) = col {
                *c = row[col].clamp(0.0, 255.0) as u8;
            }
        }
        points.push(ScenePoint {
            position: Point3::new(row[x], row[y], row[z]),
            color,
            semantic_class: label_value(row[semantic], "semantic_label")?,
            instance_id: label_value(row[instance], "instance_label")?,
        });
    }

    let mut scene_id = fallback_id.to_string();
    let mut class_names = BTreeMap::new();
    let mut orientations = BTreeMap::new();
    for comment in &header.comments {
        let mut parts = comment.splitn(2, char::is_whitespace);
        let key = parts.next().unwrap_or("");
        let rest = parts.next().unwrap_or("").trim();
        match key {
            "scene_id" if !rest.is_empty() => scene_id = rest.to_string(),
            "class" => {
                let mut kv = rest.splitn(2, char::is_whitespace);
                let id = kv.next().and_then(|s| s.parse::<u32>().ok());
                let name = kv.next().map(str::trim).filter(|s| !s.is_empty());
                if let (Some(id), Some(name)) = (id, name) {
                    class_names.insert(id, name.to_string());
                } else {
                    return Err(Error::Parse(format!("malformed class comment `{comment}`")));
                }
            }
            "orientation" => {
                let vals: Vec<&str> = rest.split_whitespace().collect();
                let parsed = match vals.as_slice() {
                    [id, fx, fy] => id.parse::<u32>().ok().zip(fx.parse::<f64>().ok()).zip(fy.parse::<f64>().ok()),
                    _ => None,
                };
                let ((id, fx), fy) =
                    parsed.ok_or_else(|| Error::Parse(format!("malformed orientation comment `{comment}`")))?;
                orientations.insert(id, Vector2::new(fx, fy));
            }
            _ => {}
        }
    }
    for p in &points {
        class_names.entry(p.semantic_class).or_insert_with(|| {
            log::warn!("scene {scene_id}: semantic class {} has no name comment", p.semantic_class);
            format!("class_{}", p.semantic_class)
        });
    }

    let cloud = ScenePointCloud {
        scene_id,
        points,
        class_names,
        orientations,
    };
    cloud.validate()?;
    Ok(cloud)
}

pub fn write_scene(scene: &ScenePointCloud, encoding: PlyEncoding) -> Vec<u8> {
    let mut header = String::new();
    header.push_str("ply\n");
    header.push_str(match encoding {
        PlyEncoding::Ascii => "format ascii 1.0\n",
        PlyEncoding::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    let _ = writeln!(header, "comment scene_id {}", scene.scene_id);
    for (id, name) in &scene.class_names {
        let _ = writeln!(header, "comment class {id} {name}");
    }
    for (id, dir) in &scene.orientations {
        let _ = writeln!(header, "comment orientation {id} {} {}", dir.x, dir.y);
    }
    let _ = writeln!(header, "element vertex {}", scene.points.len());
    for axis in ["x", "y", "z"] {
        let _ = writeln!(header, "property double {axis}");
    }
    for channel in ["red", "green", "blue"] {
        let _ = writeln!(header, "property uchar {channel}");
    }
    header.push_str("property uint semantic_label\nproperty uint instance_label\nend_header\n");

    let mut out = header.into_bytes();
    match encoding {
        PlyEncoding::Ascii => {
            let mut body = String::with_capacity(scene.points.len() * 48);
            for p in &scene.points {
                let _ = writeln!(
                    body,
                    "{} {} {} {} {} {} {} {}",
                    p.position.x,
                    p.position.y,
                    p.position.z,
                    p.color[0],
                    p.color[1],
                    p.color[2],
                    p.semantic_class,
                    p.instance_id
                );
            }
            out.extend_from_slice(body.as_bytes());
        }
        PlyEncoding::BinaryLittleEndian => {
            out.reserve(scene.points.len() * 35);
            for p in &scene.points {
                for c in p.position.iter() {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                out.extend_from_slice(&p.color);
                out.extend_from_slice(&p.semantic_class.to_le_bytes());
                out.extend_from_slice(&p.instance_id.to_le_bytes());
            }
        }
    }
    out
}
