//! PLY 1.0 reader/writer for vertex clouds (ascii and binary little-endian).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use nalgebra::Point3;

use super::{PointCloud, PointCloudError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// On-disk scalar type for coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyScalar {
    #[default]
    Float,
    Double,
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar {
        name: String,
        ty: ScalarType,
    },
    List {
        name: String,
        count: ScalarType,
        item: ScalarType,
    },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug)]
struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, PointCloudError> {
    let malformed = |m: String| PointCloudError::MalformedHeader(m);
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[pos..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| malformed("missing end_header".into()))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| malformed("header is not valid UTF-8".into()))?
            .trim_end_matches('\r')
            .to_string();
        pos += nl + 1;
        let done = line.trim() == "end_header";
        lines.push(line);
        if done {
            break;
        }
    }

    let mut iter = lines.iter().enumerate();
    match iter.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(malformed("missing 'ply' magic".into())),
    }

    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for (n, line) in iter {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, version] => {
                if *version != "1.0" {
                    return Err(PointCloudError::UnsupportedFormat(format!(
                        "version {version}"
                    )));
                }
                format = Some(match *fmt {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    "binary_big_endian" => {
                        return Err(PointCloudError::UnsupportedFormat(
                            "binary_big_endian".into(),
                        ))
                    }
                    other => return Err(malformed(format!("unknown format '{other}'"))),
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| malformed(format!("line {}: bad element count", n + 1)))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| malformed(format!("line {}: property before element", n + 1)))?;
                let (Some(count), Some(item)) = (ScalarType::parse(count), ScalarType::parse(item))
                else {
                    return Err(malformed(format!("line {}: unknown list type", n + 1)));
                };
                el.properties.push(Property::List {
                    name: name.to_string(),
                    count,
                    item,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| malformed(format!("line {}: property before element", n + 1)))?;
                let ty = ScalarType::parse(ty)
                    .ok_or_else(|| malformed(format!("line {}: unknown type '{ty}'", n + 1)))?;
                el.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            ["end_header"] => {}
            _ => return Err(malformed(format!("line {}: unrecognized '{line}'", n + 1))),
        }
    }
    let format = format.ok_or_else(|| malformed("missing format line".into()))?;
    Ok(Header {
        format,
        elements,
        body_offset: pos,
    })
}

/// Where each vertex attribute of interest lives among the vertex properties.
struct VertexLayout {
    xyz: [usize; 3],
    rgb: Option<[usize; 3]>,
}

fn vertex_layout(el: &Element) -> Result<VertexLayout, PointCloudError> {
    let find = |n: &str| {
        el.properties.iter().position(|p| match p {
            Property::Scalar { name, .. } => name == n,
            Property::List { .. } => false,
        })
    };
    let xyz = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => [x, y, z],
        _ => {
            return Err(PointCloudError::UnsupportedFormat(
                "vertex element lacks scalar x/y/z".into(),
            ))
        }
    };
    let rgb = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    for (i, p) in el.properties.iter().enumerate() {
        let used = xyz.contains(&i) || rgb.is_some_and(|c| c.contains(&i));
        if !used {
            warn!("skipping unknown vertex property '{}'", p.name());
        }
    }
    Ok(VertexLayout { xyz, rgb })
}

/// Reads a PLY file's vertex element into a cloud.
///
/// Coordinates may be stored as `float` or `double`; colors are picked up
/// from `red`/`green`/`blue` properties when all three exist.
pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud, PointCloudError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let header = parse_header(&bytes)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| PointCloudError::UnsupportedFormat("no vertex element".into()))?;
    let layout = vertex_layout(&header.elements[vertex_pos])?;

    let body = &bytes[header.body_offset..];
    let (positions, colors) = match header.format {
        PlyFormat::BinaryLittleEndian => read_binary(body, &header.elements, vertex_pos, &layout)?,
        PlyFormat::Ascii => read_ascii(body, &header.elements, vertex_pos, &layout)?,
    };
    Ok(PointCloud::with_colors(positions, colors)?.labeled(path.display().to_string()))
}

type Body = (Vec<Point3<f64>>, Option<Vec<[u8; 3]>>);

fn read_binary(
    body: &[u8],
    elements: &[Element],
    vertex_pos: usize,
    layout: &VertexLayout,
) -> Result<Body, PointCloudError> {
    let truncated = |what: &str| PointCloudError::TruncatedBody(what.to_string());
    let mut cur = 0usize;
    let take = |n: usize, cur: &mut usize| -> Result<usize, PointCloudError> {
        let at = *cur;
        if body.len() < at + n {
            return Err(truncated("unexpected end of binary body"));
        }
        *cur += n;
        Ok(at)
    };

    // skip elements preceding the vertices
    for el in &elements[..vertex_pos] {
        for _ in 0..el.count {
            for p in &el.properties {
                match p {
                    Property::Scalar { ty, .. } => {
                        take(ty.size(), &mut cur)?;
                    }
                    Property::List { count, item, .. } => {
                        let at = take(count.size(), &mut cur)?;
                        let n = count.read_le(&body[at..]) as usize;
                        take(n * item.size(), &mut cur)?;
                    }
                }
            }
        }
    }

    let el = &elements[vertex_pos];
    let fixed: Option<usize> = el
        .properties
        .iter()
        .map(|p| match p {
            Property::Scalar { ty, .. } => Some(ty.size()),
            Property::List { .. } => None,
        })
        .sum();
    let mut positions = Vec::with_capacity(el.count.min(body.len() / 12 + 1));
    let mut colors = layout
        .rgb
        .map(|_| Vec::with_capacity(el.count.min(body.len() / 12 + 1)));

    if let Some(stride) = fixed {
        // fast path: fixed-size records
        let mut offsets = Vec::with_capacity(el.properties.len());
        let mut types = Vec::with_capacity(el.properties.len());
        let mut o = 0;
        for p in &el.properties {
            if let Property::Scalar { ty, .. } = p {
                offsets.push(o);
                types.push(*ty);
                o += ty.size();
            }
        }
        let need = stride
            .checked_mul(el.count)
            .ok_or_else(|| truncated("vertex count overflows"))?;
        if body.len() < cur + need {
            return Err(PointCloudError::TruncatedBody(format!(
                "header promises {} vertices but body holds {}",
                el.count,
                (body.len() - cur) / stride.max(1)
            )));
        }
        for rec in body[cur..cur + need].chunks_exact(stride.max(1)) {
            let v = |i: usize| types[i].read_le(&rec[offsets[i]..]);
            positions.push(Point3::new(
                v(layout.xyz[0]),
                v(layout.xyz[1]),
                v(layout.xyz[2]),
            ));
            if let (Some(c), Some(rgb)) = (colors.as_mut(), layout.rgb) {
                c.push([v(rgb[0]) as u8, v(rgb[1]) as u8, v(rgb[2]) as u8]);
            }
        }
    } else {
        for _ in 0..el.count {
            let mut vals = vec![0.0; el.properties.len()];
            for (i, p) in el.properties.iter().enumerate() {
                match p {
                    Property::Scalar { ty, .. } => {
                        let at = take(ty.size(), &mut cur)?;
                        vals[i] = ty.read_le(&body[at..]);
                    }
                    Property::List { count, item, .. } => {
                        let at = take(count.size(), &mut cur)?;
                        let n = count.read_le(&body[at..]) as usize;
                        take(n * item.size(), &mut cur)?;
                    }
                }
            }
            positions.push(Point3::new(
                vals[layout.xyz[0]],
                vals[layout.xyz[1]],
                vals[layout.xyz[2]],
            ));
            if let (Some(c), Some(rgb)) = (colors.as_mut(), layout.rgb) {
                c.push([vals[rgb[0]] as u8, vals[rgb[1]] as u8, vals[rgb[2]] as u8]);
            }
        }
    }
    Ok((positions, colors))
}

fn read_ascii(
    body: &[u8],
    elements: &[Element],
    vertex_pos: usize,
    layout: &VertexLayout,
) -> Result<Body, PointCloudError> {
    let text = std::str::from_utf8(body)
        .map_err(|_| PointCloudError::MalformedHeader("ascii body is not UTF-8".into()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let skip: usize = elements[..vertex_pos].iter().map(|e| e.count).sum();
    for _ in 0..skip {
        lines
            .next()
            .ok_or_else(|| PointCloudError::TruncatedBody("ascii body ended early".into()))?;
    }
    let el = &elements[vertex_pos];
    let mut positions = Vec::with_capacity(el.count.min(text.len() / 6 + 1));
    let mut colors = layout.rgb.map(|_| Vec::new());
    for n in 0..el.count {
        let line = lines.next().ok_or_else(|| {
            PointCloudError::TruncatedBody(format!(
                "header promises {} vertices but body holds {n}",
                el.count
            ))
        })?;
        let mut toks = line.split_whitespace();
        let mut vals = vec![0.0; el.properties.len()];
        for (i, p) in el.properties.iter().enumerate() {
            let mut next = || -> Result<f64, PointCloudError> {
                toks.next()
                    .ok_or_else(|| {
                        PointCloudError::TruncatedBody(format!("vertex {n}: missing values"))
                    })?
                    .parse::<f64>()
                    .map_err(|_| {
                        PointCloudError::TruncatedBody(format!("vertex {n}: unparsable value"))
                    })
            };
            match p {
                Property::Scalar { .. } => vals[i] = next()?,
                Property::List { .. } => {
                    let len = next()? as usize;
                    for _ in 0..len {
                        next()?;
                    }
                }
            }
        }
        positions.push(Point3::new(
            vals[layout.xyz[0]],
            vals[layout.xyz[1]],
            vals[layout.xyz[2]],
        ));
        if let (Some(c), Some(rgb)) = (colors.as_mut(), layout.rgb) {
            c.push([vals[rgb[0]] as u8, vals[rgb[1]] as u8, vals[rgb[2]] as u8]);
        }
    }
    Ok((positions, colors))
}

/// Writes `cloud` with float32 coordinates.
pub fn write_ply(
    cloud: &PointCloud,
    path: impl AsRef<Path>,
    format: PlyFormat,
) -> Result<(), PointCloudError> {
    write_ply_with(cloud, path, format, PlyScalar::Float)
}

/// Writes `cloud` with the chosen coordinate precision. Output bytes depend
/// only on the cloud contents and the arguments.
pub fn write_ply_with(
    cloud: &PointCloud,
    path: impl AsRef<Path>,
    format: PlyFormat,
    scalar: PlyScalar,
) -> Result<(), PointCloudError> {
    let mut w = BufWriter::with_capacity(1 << 20, fs::File::create(path)?);
    w.write_all(header_text(cloud.len(), cloud.colors().is_some(), format, scalar).as_bytes())?;
    let colors = cloud.colors();
    match format {
        PlyFormat::BinaryLittleEndian => {
            let mut rec = Vec::with_capacity(27);
            for (i, p) in cloud.positions().iter().enumerate() {
                rec.clear();
                for v in [p.x, p.y, p.z] {
                    match scalar {
                        PlyScalar::Float => rec.extend_from_slice(&(v as f32).to_le_bytes()),
                        PlyScalar::Double => rec.extend_from_slice(&v.to_le_bytes()),
                    }
                }
                if let Some(c) = colors {
                    rec.extend_from_slice(&c[i]);
                }
                w.write_all(&rec)?;
            }
        }
        PlyFormat::Ascii => {
            for (i, p) in cloud.positions().iter().enumerate() {
                match scalar {
                    PlyScalar::Float => write!(w, "{} {} {}", p.x as f32, p.y as f32, p.z as f32)?,
                    PlyScalar::Double => write!(w, "{} {} {}", p.x, p.y, p.z)?,
                }
                if let Some(c) = colors {
                    write!(w, " {} {} {}", c[i][0], c[i][1], c[i][2])?;
                }
                w.write_all(b"\n")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn header_text(n: usize, colors: bool, format: PlyFormat, scalar: PlyScalar) -> String {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let ty = match scalar {
        PlyScalar::Float => "float",
        PlyScalar::Double => "double",
    };
    let mut h = format!(
        "ply\nformat {fmt} 1.0\nelement vertex {n}\nproperty {ty} x\nproperty {ty} y\nproperty {ty} z\n"
    );
    if colors {
        h.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    h.push_str("end_header\n");
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(bytes: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(bytes).unwrap();
        f
    }

    #[test]
    fn ascii_fixture() {
        let f = write_tmp(
            b"ply\nformat ascii 1.0\ncomment hand written\nelement vertex 3\n\
              property float x\nproperty float y\nproperty float z\n\
              property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n\
              0 0 0 255 0 0\n1 0 0 0 255 0\n0 1 0.5 0 0 255\n",
        );
        let c = read_ply(f.path()).unwrap();
        assert_eq!(
            c.positions(),
            &[
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.5)
            ]
        );
        assert_eq!(c.colors().unwrap()[2], [0, 0, 255]);
    }

    #[test]
    fn truncated_ascii_body() {
        let mut s = String::from(
            "ply\nformat ascii 1.0\nelement vertex 10\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        );
        for i in 0..5 {
            s.push_str(&format!("{i} 0 0\n"));
        }
        let f = write_tmp(s.as_bytes());
        assert!(matches!(
            read_ply(f.path()),
            Err(PointCloudError::TruncatedBody(_))
        ));
    }

    #[test]
    fn truncated_binary_body() {
        let mut b = b"ply\nformat binary_little_endian 1.0\nelement vertex 10\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        b.extend(std::iter::repeat_n(0u8, 5 * 12));
        let f = write_tmp(&b);
        assert!(matches!(
            read_ply(f.path()),
            Err(PointCloudError::TruncatedBody(_))
        ));
    }

    #[test]
    fn header_errors() {
        let f = write_tmp(
            b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n",
        );
        assert!(matches!(
            read_ply(f.path()),
            Err(PointCloudError::UnsupportedFormat(_))
        ));
        let f = write_tmp(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n");
        assert!(matches!(
            read_ply(f.path()),
            Err(PointCloudError::UnsupportedFormat(_))
        ));
        let f = write_tmp(b"not a ply\n");
        assert!(matches!(
            read_ply(f.path()),
            Err(PointCloudError::MalformedHeader(_))
        ));
        let f = write_tmp(b"ply\nformat ascii 1.0\nelement vertex 1\n");
        assert!(matches!(
            read_ply(f.path()),
            Err(PointCloudError::MalformedHeader(_))
        ));
    }

    #[test]
    fn skips_faces_and_extra_properties() {
        // face element before vertices, plus an unknown vertex property
        let mut b = b"ply\nformat binary_little_endian 1.0\nelement face 1\nproperty list uchar int vertex_indices\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty float intensity\nend_header\n".to_vec();
        b.push(3);
        for i in 0..3i32 {
            b.extend_from_slice(&i.to_le_bytes());
        }
        for v in [1.0f32, 2.0, 3.0, 9.0, 4.0, 5.0, 6.0, 9.0] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        let f = write_tmp(&b);
        let c = read_ply(f.path()).unwrap();
        assert_eq!(
            c.positions(),
            &[Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)]
        );
    }

    #[test]
    fn empty_cloud_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        for fmt in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let p = dir.path().join("e.ply");
            write_ply(&PointCloud::empty(), &p, fmt).unwrap();
            let text = fs::read(&p).unwrap();
            assert!(String::from_utf8_lossy(&text).contains("element vertex 0\n"));
            assert!(read_ply(&p).unwrap().is_empty());
        }
    }

    #[test]
    fn header_counts_do_not_overflow() {
        let h = header_text(
            10_000_000,
            true,
            PlyFormat::BinaryLittleEndian,
            PlyScalar::Float,
        );
        assert!(h.contains("element vertex 10000000\n"));
        let h = header_text(5_000_000_000, false, PlyFormat::Ascii, PlyScalar::Float);
        assert!(h.contains("element vertex 5000000000\n"));
    }
}
