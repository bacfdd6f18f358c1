//! PLY (read/write) and OBJ (write-only) file I/O.
//!
//! PLY is the interchange format: ASCII and binary-little-endian bodies,
//! `vertex` elements with float/double x,y,z and optional uchar
//! red/green/blue, `face` elements with a triangular index list. Unknown
//! properties and elements are parsed and discarded. Parse failures name
//! the line (ASCII / header) or absolute byte offset (binary) at fault.
//!
//! Writers emit `double` coordinates; together with Rust's shortest
//! round-trip float formatting this makes ASCII and binary round trips
//! bit-exact.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::cloud::{PointCloud, Rgb};
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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
    fn parse(token: &str) -> Option<Self> {
        Some(match token {
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

    fn is_integer(self) -> bool {
        !matches!(self, ScalarType::F32 | ScalarType::F64)
    }
}

#[derive(Clone, Debug)]
enum PropKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Clone, Debug)]
struct PropDecl {
    name: String,
    kind: PropKind,
}

#[derive(Clone, Debug)]
struct ElementDecl {
    name: String,
    count: usize,
    props: Vec<PropDecl>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<ElementDecl>,
    body_start: usize,
    header_lines: usize,
}

fn perr(path: &Path, line: Option<usize>, byte_offset: Option<u64>, message: String) -> Error {
    Error::PlyParse {
        path: path.to_path_buf(),
        line,
        byte_offset,
        message,
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn next_header_line(
    bytes: &[u8],
    cursor: &mut usize,
    line_no: &mut usize,
    path: &Path,
) -> Result<Option<(usize, String)>> {
    if *cursor >= bytes.len() {
        return Ok(None);
    }
    let end = bytes[*cursor..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|p| p + *cursor);
    let (line_bytes, new_cursor) = match end {
        Some(e) => (&bytes[*cursor..e], e + 1),
        None => (&bytes[*cursor..], bytes.len()),
    };
    *cursor = new_cursor;
    *line_no += 1;
    let line = std::str::from_utf8(line_bytes)
        .map_err(|_| {
            perr(
                path,
                Some(*line_no),
                None,
                "header line is not valid UTF-8".into(),
            )
        })?
        .trim_end_matches('\r')
        .to_string();
    Ok(Some((*line_no, line)))
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    let mut cursor = 0usize;
    let mut line_no = 0usize;

    match next_header_line(bytes, &mut cursor, &mut line_no, path)? {
        Some((_, magic)) if magic.trim() == "ply" => {}
        Some((n, other)) => {
            return Err(perr(
                path,
                Some(n),
                None,
                format!("expected magic 'ply', found '{other}'"),
            ))
        }
        None => return Err(perr(path, Some(1), None, "empty file".into())),
    }

    let mut format = None;
    let mut elements: Vec<ElementDecl> = Vec::new();
    loop {
        let Some((n, line)) = next_header_line(bytes, &mut cursor, &mut line_no, path)? else {
            return Err(perr(
                path,
                Some(line_no),
                None,
                "header ends without 'end_header'".into(),
            ));
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.first().copied() {
            None => continue,
            Some("comment") | Some("obj_info") => continue,
            Some("format") => {
                format = Some(match tokens.get(1).copied() {
                    Some("ascii") => PlyFormat::Ascii,
                    Some("binary_little_endian") => PlyFormat::BinaryLittleEndian,
                    Some(other) => {
                        return Err(perr(
                            path,
                            Some(n),
                            None,
                            format!("unsupported format '{other}'"),
                        ))
                    }
                    None => {
                        return Err(perr(path, Some(n), None, "format line too short".into()))
                    }
                });
            }
            Some("element") => {
                let (name, count) = match (tokens.get(1), tokens.get(2)) {
                    (Some(name), Some(count)) => (*name, *count),
                    _ => {
                        return Err(perr(
                            path,
                            Some(n),
                            None,
                            "element line needs a name and a count".into(),
                        ))
                    }
                };
                let count: usize = count.parse().map_err(|_| {
                    perr(path, Some(n), None, format!("bad element count '{count}'"))
                })?;
                elements.push(ElementDecl {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| {
                    perr(path, Some(n), None, "property before any element".into())
                })?;
                if tokens.get(1).copied() == Some("list") {
                    let (c, i, name) = match (tokens.get(2), tokens.get(3), tokens.get(4)) {
                        (Some(c), Some(i), Some(name)) => (*c, *i, *name),
                        _ => {
                            return Err(perr(
                                path,
                                Some(n),
                                None,
                                "list property needs count type, item type and name".into(),
                            ))
                        }
                    };
                    let count = ScalarType::parse(c).ok_or_else(|| {
                        perr(path, Some(n), None, format!("unknown type '{c}'"))
                    })?;
                    let item = ScalarType::parse(i).ok_or_else(|| {
                        perr(path, Some(n), None, format!("unknown type '{i}'"))
                    })?;
                    el.props.push(PropDecl {
                        name: name.to_string(),
                        kind: PropKind::List { count, item },
                    });
                } else {
                    let (t, name) = match (tokens.get(1), tokens.get(2)) {
                        (Some(t), Some(name)) => (*t, *name),
                        _ => {
                            return Err(perr(
                                path,
                                Some(n),
                                None,
                                "property line needs a type and a name".into(),
                            ))
                        }
                    };
                    let ty = ScalarType::parse(t).ok_or_else(|| {
                        perr(path, Some(n), None, format!("unknown type '{t}'"))
                    })?;
                    el.props.push(PropDecl {
                        name: name.to_string(),
                        kind: PropKind::Scalar(ty),
                    });
                }
            }
            Some("end_header") => {
                let format = format.ok_or_else(|| {
                    perr(path, Some(n), None, "missing 'format' line".into())
                })?;
                return Ok(Header {
                    format,
                    elements,
                    body_start: cursor,
                    header_lines: line_no,
                });
            }
            Some(other) => {
                return Err(perr(
                    path,
                    Some(n),
                    None,
                    format!("unrecognized header keyword '{other}'"),
                ));
            }
        }
    }
}

/// Sequential reader over the PLY body, reporting ASCII positions as line
/// numbers and binary positions as absolute byte offsets.
enum BodyReader<'a> {
    Ascii {
        lines: std::str::Lines<'a>,
        line_no: usize,
    },
    Binary {
        bytes: &'a [u8],
        offset: usize,
    },
}

/// One parsed property value. Lists are delivered through `RowSink`.
#[derive(Clone, Copy)]
struct Scalar {
    value: f64,
    type_: ScalarType,
}

impl<'a> BodyReader<'a> {
    fn location(&self) -> (Option<usize>, Option<u64>) {
        match self {
            BodyReader::Ascii { line_no, .. } => (Some(*line_no), None),
            BodyReader::Binary { offset, .. } => (None, Some(*offset as u64)),
        }
    }
}

struct RowCursor<'a> {
    tokens: Option<std::str::SplitWhitespace<'a>>, // ASCII rows only
}

fn take_ascii_row<'a>(
    reader: &mut BodyReader<'a>,
    path: &Path,
    element: &str,
    row: usize,
    total: usize,
) -> Result<RowCursor<'a>> {
    match reader {
        BodyReader::Ascii { lines, line_no } => loop {
            let Some(line) = lines.next() else {
                return Err(perr(
                    path,
                    Some(*line_no + 1),
                    None,
                    format!("file ends after {row} of {total} '{element}' rows"),
                ));
            };
            *line_no += 1;
            if !line.trim().is_empty() {
                return Ok(RowCursor {
                    tokens: Some(line.split_whitespace()),
                });
            }
        },
        BodyReader::Binary { .. } => Ok(RowCursor { tokens: None }),
    }
}

fn read_scalar(
    reader: &mut BodyReader,
    cursor: &mut RowCursor,
    ty: ScalarType,
    path: &Path,
) -> Result<Scalar> {
    match reader {
        BodyReader::Ascii { line_no, .. } => {
            let token = cursor
                .tokens
                .as_mut()
                .and_then(|t| t.next())
                .ok_or_else(|| {
                    perr(path, Some(*line_no), None, "row has too few values".into())
                })?;
            let value = if ty.is_integer() {
                let v: i64 = token.parse().map_err(|_| {
                    perr(
                        path,
                        Some(*line_no),
                        None,
                        format!("bad integer value '{token}'"),
                    )
                })?;
                let (lo, hi): (i64, i64) = match ty {
                    ScalarType::I8 => (i8::MIN as i64, i8::MAX as i64),
                    ScalarType::U8 => (0, u8::MAX as i64),
                    ScalarType::I16 => (i16::MIN as i64, i16::MAX as i64),
                    ScalarType::U16 => (0, u16::MAX as i64),
                    ScalarType::I32 => (i32::MIN as i64, i32::MAX as i64),
                    ScalarType::U32 => (0, u32::MAX as i64),
                    _ => unreachable!(),
                };
                if v < lo || v > hi {
                    return Err(perr(
                        path,
                        Some(*line_no),
                        None,
                        format!("value {v} out of range for its declared type"),
                    ));
                }
                v as f64
            } else {
                token.parse::<f64>().map_err(|_| {
                    perr(
                        path,
                        Some(*line_no),
                        None,
                        format!("bad numeric value '{token}'"),
                    )
                })?
            };
            Ok(Scalar { value, type_: ty })
        }
        BodyReader::Binary { bytes, offset } => {
            let size = ty.size();
            if *offset + size > bytes.len() {
                return Err(perr(
                    path,
                    None,
                    Some(*offset as u64),
                    "unexpected end of file".into(),
                ));
            }
            let raw = &bytes[*offset..*offset + size];
            *offset += size;
            let value = match ty {
                ScalarType::I8 => raw[0] as i8 as f64,
                ScalarType::U8 => raw[0] as f64,
                ScalarType::I16 => i16::from_le_bytes([raw[0], raw[1]]) as f64,
                ScalarType::U16 => u16::from_le_bytes([raw[0], raw[1]]) as f64,
                ScalarType::I32 => i32::from_le_bytes(raw.try_into().unwrap()) as f64,
                ScalarType::U32 => u32::from_le_bytes(raw.try_into().unwrap()) as f64,
                ScalarType::F32 => f32::from_le_bytes(raw.try_into().unwrap()) as f64,
                ScalarType::F64 => f64::from_le_bytes(raw.try_into().unwrap()),
            };
            Ok(Scalar { value, type_: ty })
        }
    }
}

struct ParsedPly {
    vertices: Vec<Point3<f64>>,
    colors: Option<Vec<Rgb>>,
    faces: Vec<[u32; 3]>,
    has_face_element: bool,
}

fn parse_ply(path: &Path) -> Result<ParsedPly> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let header = parse_header(&bytes, path)?;

    let body = &bytes[header.body_start.min(bytes.len())..];
    let mut reader = match header.format {
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(body).map_err(|e| {
                perr(
                    path,
                    None,
                    Some((header.body_start + e.valid_up_to()) as u64),
                    "ASCII body is not valid UTF-8".into(),
                )
            })?;
            BodyReader::Ascii {
                lines: text.lines(),
                line_no: header.header_lines,
            }
        }
        PlyFormat::BinaryLittleEndian => BodyReader::Binary {
            bytes: &bytes,
            offset: header.body_start,
        },
    };

    let mut out = ParsedPly {
        vertices: Vec::new(),
        colors: None,
        faces: Vec::new(),
        has_face_element: false,
    };

    for el in &header.elements {
        match el.name.as_str() {
            "vertex" => read_vertex_element(&mut reader, el, path, &mut out)?,
            "face" => {
                out.has_face_element = true;
                read_face_element(&mut reader, el, path, &mut out)?;
            }
            _ => skip_element(&mut reader, el, path)?,
        }
    }
    Ok(out)
}

fn read_vertex_element(
    reader: &mut BodyReader,
    el: &ElementDecl,
    path: &Path,
    out: &mut ParsedPly,
) -> Result<()> {
    let find = |name: &str| el.props.iter().position(|p| p.name == name);
    let xyz = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => [x, y, z],
        _ => {
            return Err(perr(
                path,
                None,
                None,
                "vertex element is missing x/y/z properties".into(),
            ))
        }
    };
    // Colors count only when all three channels are declared as uchar.
    let color_idx = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => {
            let all_u8 = [r, g, b].iter().all(|&i| {
                matches!(el.props[i].kind, PropKind::Scalar(ScalarType::U8))
            });
            all_u8.then_some([r, g, b])
        }
        _ => None,
    };

    out.vertices.reserve(el.count);
    let mut colors: Option<Vec<Rgb>> = color_idx.map(|_| Vec::with_capacity(el.count));

    for row in 0..el.count {
        let mut cursor = take_ascii_row(reader, path, &el.name, row, el.count)?;
        let mut coords = [0.0f64; 3];
        let mut rgb = [0u8; 3];
        for (pi, prop) in el.props.iter().enumerate() {
            match &prop.kind {
                PropKind::Scalar(ty) => {
                    let s = read_scalar(reader, &mut cursor, *ty, path)?;
                    if let Some(axis) = xyz.iter().position(|&i| i == pi) {
                        coords[axis] = s.value;
                    } else if let Some(ci) =
                        color_idx.and_then(|c| c.iter().position(|&i| i == pi))
                    {
                        rgb[ci] = s.value as u8;
                    }
                }
                PropKind::List { count, item } => {
                    skip_list(reader, &mut cursor, *count, *item, path)?;
                }
            }
        }
        if !coords.iter().all(|c| c.is_finite()) {
            let (line, byte) = reader.location();
            return Err(perr(
                path,
                line,
                byte,
                format!("non-finite coordinate in vertex {row}"),
            ));
        }
        out.vertices.push(Point3::new(coords[0], coords[1], coords[2]));
        if let Some(c) = &mut colors {
            c.push(rgb);
        }
    }
    out.colors = colors;
    Ok(())
}

fn read_face_element(
    reader: &mut BodyReader,
    el: &ElementDecl,
    path: &Path,
    out: &mut ParsedPly,
) -> Result<()> {
    let list_idx = el.props.iter().position(|p| {
        matches!(p.kind, PropKind::List { .. })
            && (p.name == "vertex_indices" || p.name == "vertex_index")
    });
    let Some(list_idx) = list_idx else {
        return Err(perr(
            path,
            None,
            None,
            "face element has no vertex_indices list".into(),
        ));
    };
    let vertex_count = out.vertices.len() as i64;

    out.faces.reserve(el.count);
    for row in 0..el.count {
        let mut cursor = take_ascii_row(reader, path, &el.name, row, el.count)?;
        for (pi, prop) in el.props.iter().enumerate() {
            match &prop.kind {
                PropKind::Scalar(ty) => {
                    read_scalar(reader, &mut cursor, *ty, path)?;
                }
                PropKind::List { count, item } => {
                    if pi != list_idx {
                        skip_list(reader, &mut cursor, *count, *item, path)?;
                        continue;
                    }
                    let n = read_scalar(reader, &mut cursor, *count, path)?.value as usize;
                    if n != 3 {
                        let (line, byte) = reader.location();
                        return Err(perr(
                            path,
                            line,
                            byte,
                            format!("face {row} has {n} vertices; only triangles are supported"),
                        ));
                    }
                    let mut face = [0u32; 3];
                    for slot in &mut face {
                        let v = read_scalar(reader, &mut cursor, *item, path)?;
                        let idx = v.value as i64;
                        if !v.type_.is_integer() || idx < 0 || idx >= vertex_count {
                            let (line, byte) = reader.location();
                            return Err(perr(
                                path,
                                line,
                                byte,
                                format!(
                                    "face {row} index {} outside 0..{vertex_count}",
                                    v.value
                                ),
                            ));
                        }
                        *slot = idx as u32;
                    }
                    out.faces.push(face);
                }
            }
        }
    }
    Ok(())
}

fn skip_list(
    reader: &mut BodyReader,
    cursor: &mut RowCursor,
    count: ScalarType,
    item: ScalarType,
    path: &Path,
) -> Result<()> {
    let n = read_scalar(reader, cursor, count, path)?.value as usize;
    for _ in 0..n {
        read_scalar(reader, cursor, item, path)?;
    }
    Ok(())
}

fn skip_element(reader: &mut BodyReader, el: &ElementDecl, path: &Path) -> Result<()> {
    for row in 0..el.count {
        let mut cursor = take_ascii_row(reader, path, &el.name, row, el.count)?;
        for prop in &el.props {
            match &prop.kind {
                PropKind::Scalar(ty) => {
                    read_scalar(reader, &mut cursor, *ty, path)?;
                }
                PropKind::List { count, item } => {
                    let n = read_scalar(reader, &mut cursor, *count, path)?.value as usize;
                    for _ in 0..n {
                        read_scalar(reader, &mut cursor, *item, path)?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Loads a point cloud from the `vertex` element; any `face` element is
/// parsed and ignored.
pub fn load_ply<P: AsRef<Path>>(path: P) -> Result<PointCloud> {
    let parsed = parse_ply(path.as_ref())?;
    PointCloud::new(parsed.vertices, parsed.colors)
}

/// Loads a triangle mesh; a PLY without a `face` element yields a mesh
/// with zero faces.
pub fn load_mesh_ply<P: AsRef<Path>>(path: P) -> Result<TriangleMesh> {
    let parsed = parse_ply(path.as_ref())?;
    TriangleMesh::new(parsed.vertices, parsed.faces, parsed.colors)
}

fn write_vertex_header(
    w: &mut impl Write,
    format: PlyFormat,
    count: usize,
    with_colors: bool,
) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    match format {
        PlyFormat::Ascii => writeln!(w, "format ascii 1.0")?,
        PlyFormat::BinaryLittleEndian => writeln!(w, "format binary_little_endian 1.0")?,
    }
    writeln!(w, "element vertex {count}")?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    if with_colors {
        writeln!(w, "property uchar red")?;
        writeln!(w, "property uchar green")?;
        writeln!(w, "property uchar blue")?;
    }
    Ok(())
}

fn write_vertices(
    w: &mut impl Write,
    format: PlyFormat,
    vertices: &[Point3<f64>],
    colors: Option<&[Rgb]>,
) -> std::io::Result<()> {
    for (i, p) in vertices.iter().enumerate() {
        match format {
            PlyFormat::Ascii => {
                write!(w, "{} {} {}", p.x, p.y, p.z)?;
                if let Some(c) = colors {
                    write!(w, " {} {} {}", c[i][0], c[i][1], c[i][2])?;
                }
                writeln!(w)?;
            }
            PlyFormat::BinaryLittleEndian => {
                w.write_all(&p.x.to_le_bytes())?;
                w.write_all(&p.y.to_le_bytes())?;
                w.write_all(&p.z.to_le_bytes())?;
                if let Some(c) = colors {
                    w.write_all(&c[i])?;
                }
            }
        }
    }
    Ok(())
}

pub fn save_ply_as<P: AsRef<Path>>(
    cloud: &PointCloud,
    path: P,
    format: PlyFormat,
) -> Result<()> {
    let path = path.as_ref();
    let inner = || -> std::io::Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        write_vertex_header(&mut w, format, cloud.len(), cloud.has_colors())?;
        writeln!(w, "end_header")?;
        write_vertices(&mut w, format, cloud.points(), cloud.colors())?;
        w.flush()
    };
    inner().map_err(|e| io_err(path, e))
}

/// Saves a cloud as ASCII PLY.
pub fn save_ply<P: AsRef<Path>>(cloud: &PointCloud, path: P) -> Result<()> {
    save_ply_as(cloud, path, PlyFormat::Ascii)
}

pub fn save_mesh_ply_as<P: AsRef<Path>>(
    mesh: &TriangleMesh,
    path: P,
    format: PlyFormat,
) -> Result<()> {
    let path = path.as_ref();
    let inner = || -> std::io::Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        write_vertex_header(&mut w, format, mesh.vertices.len(), mesh.colors.is_some())?;
        writeln!(w, "element face {}", mesh.faces.len())?;
        writeln!(w, "property list uchar int vertex_indices")?;
        writeln!(w, "end_header")?;
        write_vertices(&mut w, format, &mesh.vertices, mesh.colors.as_deref())?;
        for f in &mesh.faces {
            match format {
                PlyFormat::Ascii => writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?,
                PlyFormat::BinaryLittleEndian => {
                    w.write_all(&[3u8])?;
                    for &v in f {
                        w.write_all(&(v as i32).to_le_bytes())?;
                    }
                }
            }
        }
        w.flush()
    };
    inner().map_err(|e| io_err(path, e))
}

/// Saves a mesh as ASCII PLY.
pub fn save_mesh_ply<P: AsRef<Path>>(mesh: &TriangleMesh, path: P) -> Result<()> {
    save_mesh_ply_as(mesh, path, PlyFormat::Ascii)
}

/// Writes v/f records only; colors are not representable here.
pub fn save_obj<P: AsRef<Path>>(mesh: &TriangleMesh, path: P) -> Result<()> {
    let path = path.as_ref();
    let inner = || -> std::io::Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for p in &mesh.vertices {
            writeln!(w, "v {} {} {}", p.x, p.y, p.z)?;
        }
        for f in &mesh.faces {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        w.flush()
    };
    inner().map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content).unwrap();
        f.flush().unwrap();
        f
    }

    const ASCII_COLORED: &str = "ply\n\
format ascii 1.0\n\
element vertex 3\n\
property float x\n\
property float y\n\
property float z\n\
property uchar red\n\
property uchar green\n\
property uchar blue\n\
end_header\n\
0 0 0 255 0 0\n\
1 0 0 0 255 0\n\
0 1 0 0 0 255\n";

    #[test]
    fn loads_ascii_with_colors() {
        let f = write_temp(ASCII_COLORED.as_bytes());
        let cloud = load_ply(f.path()).unwrap();
        assert_eq!(cloud.len(), 3);
        assert_eq!(
            cloud.colors().unwrap(),
            &[[255, 0, 0], [0, 255, 0], [0, 0, 255]]
        );
        assert_eq!(cloud.points()[1], Point3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn loads_ascii_without_colors() {
        let plain = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 0 0\n0 1 0\n";
        let f = write_temp(plain.as_bytes());
        let cloud = load_ply(f.path()).unwrap();
        assert_eq!(cloud.len(), 3);
        assert!(!cloud.has_colors());
    }

    #[test]
    fn count_mismatch_is_an_error_with_line() {
        let short = "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n";
        let f = write_temp(short.as_bytes());
        match load_ply(f.path()) {
            Err(Error::PlyParse { line, message, .. }) => {
                assert_eq!(line, Some(12));
                assert!(message.contains("4 of 5"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_header_names_line() {
        let bad = "ply\nformat ascii 1.0\nelement vertex x\nend_header\n";
        let f = write_temp(bad.as_bytes());
        match load_ply(f.path()) {
            Err(Error::PlyParse { line, .. }) => assert_eq!(line, Some(3)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_coordinate_rejected_with_location() {
        let bad = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 nan 0\n";
        let f = write_temp(bad.as_bytes());
        match load_ply(f.path()) {
            Err(Error::PlyParse { line, message, .. }) => {
                assert_eq!(line, Some(8));
                assert!(message.contains("non-finite"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn binary_truncation_names_byte_offset() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(
            b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        );
        let header_len = bytes.len() as u64;
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        bytes.extend_from_slice(&2.0f64.to_le_bytes());
        bytes.extend_from_slice(&3.0f64.to_le_bytes());
        // Second vertex missing entirely.
        let f = write_temp(&bytes);
        match load_ply(f.path()) {
            Err(Error::PlyParse { byte_offset, .. }) => {
                assert_eq!(byte_offset, Some(header_len + 24));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    fn sample_cloud() -> PointCloud {
        PointCloud::new(
            vec![
                Point3::new(0.125, -3.5, 7.0625),
                Point3::new(1.0 / 3.0, 0.1, -9.25),
                Point3::new(-0.7, 2.0f64.sqrt(), 0.0),
            ],
            Some(vec![[10, 20, 30], [0, 0, 0], [255, 255, 255]]),
        )
        .unwrap()
    }

    #[test]
    fn ascii_round_trip_is_exact() {
        let cloud = sample_cloud();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        save_ply(&cloud, &path).unwrap();
        let back = load_ply(&path).unwrap();
        assert_eq!(back.points(), cloud.points());
        assert_eq!(back.colors(), cloud.colors());
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let cloud = sample_cloud();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        save_ply_as(&cloud, &path, PlyFormat::BinaryLittleEndian).unwrap();
        let back = load_ply(&path).unwrap();
        assert_eq!(back.points(), cloud.points());
        assert_eq!(back.colors(), cloud.colors());
    }

    #[test]
    fn saved_colored_cloud_declares_color_properties() {
        let cloud = sample_cloud();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        save_ply(&cloud, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        for prop in ["property uchar red", "property uchar green", "property uchar blue"] {
            assert!(text.contains(prop), "missing {prop}");
        }
    }

    #[test]
    fn mesh_round_trip_preserves_faces_exactly() {
        let mesh = crate::mesh::fixtures::unit_cube();
        let dir = tempfile::tempdir().unwrap();
        for format in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let path = dir.path().join("m.ply");
            save_mesh_ply_as(&mesh, &path, format).unwrap();
            let back = load_mesh_ply(&path).unwrap();
            assert_eq!(back.faces, mesh.faces);
            assert_eq!(back.vertices, mesh.vertices);
        }
    }

    #[test]
    fn obj_has_one_face_record_per_face() {
        let mesh = crate::mesh::fixtures::unit_cube();
        assert_eq!(mesh.faces.len(), 12);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.obj");
        save_obj(&mesh, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 12);
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 8);
        // OBJ face indices are 1-based.
        assert!(text.contains("f 1 3 2"));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let cloud = sample_cloud();
        let r = save_ply(&cloud, "/nonexistent-dir/out.ply");
        assert!(matches!(r, Err(Error::Io { .. })));
    }

    #[test]
    fn big_endian_rejected() {
        let bad = "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
        let f = write_temp(bad.as_bytes());
        match load_ply(f.path()) {
            Err(Error::PlyParse { line, message, .. }) => {
                assert_eq!(line, Some(2));
                assert!(message.contains("binary_big_endian"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
