//! OFF and PLY readers and writers.

use std::io::{Read, Write};
use std::path::Path;

use super::{TriMesh, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(MeshFormat::Off),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

/// Vertices and faces as read from disk, before any validation.
#[derive(Debug, Clone, Default)]
pub struct RawMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

pub fn parse_raw_mesh(mut source: impl Read, format: MeshFormat) -> Result<RawMesh> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    match format {
        MeshFormat::Off => parse_off(&bytes),
        MeshFormat::Ply => parse_ply(&bytes),
    }
}

/// Parses and validates a mesh.
pub fn load_mesh(source: impl Read, format: MeshFormat, specimen_id: &str) -> Result<TriMesh> {
    let raw = parse_raw_mesh(source, format)?;
    TriMesh::new(raw.vertices, raw.faces, specimen_id)
}

/// Loads a mesh file, inferring the format from its extension and the
/// specimen id from its file stem.
pub fn load_mesh_file(path: &Path) -> Result<TriMesh> {
    let format = MeshFormat::from_path(path)
        .ok_or_else(|| Error::Parse(format!("unknown mesh extension: {}", path.display())))?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh").to_string();
    let file = std::fs::File::open(path)?;
    load_mesh(std::io::BufReader::new(file), format, &id)
}

fn parse_off(bytes: &[u8]) -> Result<RawMesh> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Parse("OFF file is not UTF-8".into()))?;
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace());
    let magic = tokens.next().ok_or_else(|| Error::Parse("empty OFF file".into()))?;
    if magic != "OFF" {
        return Err(Error::Parse(format!("expected OFF header, found {magic:?}")));
    }
    let mut next_num = |what: &str| -> Result<String> {
        tokens
            .next()
            .map(str::to_string)
            .ok_or_else(|| Error::Parse(format!("unexpected end of file reading {what}")))
    };
    let nv: usize = parse_tok(&next_num("vertex count")?)?;
    let nf: usize = parse_tok(&next_num("face count")?)?;
    let _ne: usize = parse_tok(&next_num("edge count")?)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x: f64 = parse_tok(&next_num("vertex")?)?;
        let y: f64 = parse_tok(&next_num("vertex")?)?;
        let z: f64 = parse_tok(&next_num("vertex")?)?;
        vertices.push(Vec3::new(x, y, z));
    }
    let mut faces = Vec::with_capacity(nf);
    for fi in 0..nf {
        let k: usize = parse_tok(&next_num("face")?)?;
        if k != 3 {
            return Err(Error::Parse(format!("face {fi} has {k} vertices; only triangles are supported")));
        }
        let a: usize = parse_tok(&next_num("face")?)?;
        let b: usize = parse_tok(&next_num("face")?)?;
        let c: usize = parse_tok(&next_num("face")?)?;
        faces.push([a, b, c]);
    }
    Ok(RawMesh { vertices, faces })
}

fn parse_tok<T: std::str::FromStr>(tok: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse(format!("invalid number {tok:?}")))
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
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::Parse(format!("unknown PLY scalar type {other:?}"))),
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

    fn read_le(self, b: &[u8]) -> f64 {
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

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

fn parse_ply(bytes: &[u8]) -> Result<RawMesh> {
    let marker = b"end_header";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::Parse("PLY header lacks end_header".into()))?;
    let mut body_start = end + marker.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::Parse("PLY header is not UTF-8".into()))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::Parse("missing 'ply' magic".into()));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", other, _] => return Err(Error::Parse(format!("unsupported PLY format {other}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: parse_tok(count)?,
                props: Vec::new(),
            }),
            ["property", "list", c, i, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Parse("property before element".into()))?
                .props
                .push(Property::List { name: name.to_string(), count: Scalar::parse(c)?, item: Scalar::parse(i)? }),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Parse("property before element".into()))?
                .props
                .push(Property::Scalar { name: name.to_string(), ty: Scalar::parse(ty)? }),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(Error::Parse(format!("unrecognized PLY header line {line:?}"))),
        }
    }
    let binary = binary.ok_or_else(|| Error::Parse("PLY format line missing".into()))?;
    let body = &bytes[body_start..];
    let mut reader: Box<dyn ValueReader> = if binary {
        Box::new(BinaryReader { data: body, pos: 0 })
    } else {
        let text = std::str::from_utf8(body).map_err(|_| Error::Parse("PLY body is not UTF-8".into()))?;
        Box::new(AsciiReader { tokens: text.split_whitespace() })
    };

    let mut raw = RawMesh::default();
    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [f64::NAN; 3];
            let mut face: Option<Vec<usize>> = None;
            for p in &el.props {
                match p {
                    Property::Scalar { name, ty } => {
                        let v = reader.read(*ty)?;
                        match name.as_str() {
                            "x" => xyz[0] = v,
                            "y" => xyz[1] = v,
                            "z" => xyz[2] = v,
                            _ => {}
                        }
                    }
                    Property::List { name, count, item } => {
                        let n = reader.read(*count)?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(Error::Parse(format!("invalid list length {n}")));
                        }
                        let mut items = Vec::with_capacity(n as usize);
                        for _ in 0..n as usize {
                            let idx = reader.read(*item)?;
                            if idx < 0.0 || idx.fract() != 0.0 {
                                return Err(Error::Parse(format!("invalid vertex index {idx}")));
                            }
                            items.push(idx as usize);
                        }
                        if name == "vertex_indices" || name == "vertex_index" {
                            face = Some(items);
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => {
                    if xyz.iter().any(|c| c.is_nan()) {
                        return Err(Error::Parse("vertex element lacks x, y or z".into()));
                    }
                    raw.vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
                }
                "face" => {
                    let f = face.ok_or_else(|| Error::Parse("face element lacks vertex_indices".into()))?;
                    if f.len() != 3 {
                        return Err(Error::Parse(format!("face with {} vertices; only triangles are supported", f.len())));
                    }
                    raw.faces.push([f[0], f[1], f[2]]);
                }
                _ => {}
            }
        }
    }
    Ok(raw)
}

trait ValueReader {
    fn read(&mut self, ty: Scalar) -> Result<f64>;
}

struct AsciiReader<'a> {
    tokens: std::str::SplitWhitespace<'a>,
}

impl ValueReader for AsciiReader<'_> {
    fn read(&mut self, _ty: Scalar) -> Result<f64> {
        let t = self.tokens.next().ok_or_else(|| Error::Parse("unexpected end of PLY body".into()))?;
        parse_tok(t)
    }
}

struct BinaryReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl ValueReader for BinaryReader<'_> {
    fn read(&mut self, ty: Scalar) -> Result<f64> {
        let n = ty.size();
        if self.pos + n > self.data.len() {
            return Err(Error::Parse("unexpected end of binary PLY body".into()));
        }
        let v = ty.read_le(&self.data[self.pos..self.pos + n]);
        self.pos += n;
        Ok(v)
    }
}

/// Writes ASCII OFF with 17 significant digits per coordinate.
pub fn write_off(mesh: &TriMesh, mut out: impl Write) -> Result<()> {
    writeln!(out, "OFF")?;
    writeln!(out, "{} {} 0", mesh.num_vertices(), mesh.num_faces())?;
    for v in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e} {:.16e}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

/// Writes ASCII PLY with double-precision vertices.
pub fn write_ply_ascii(mesh: &TriMesh, mut out: impl Write) -> Result<()> {
    writeln!(out, "ply\nformat ascii 1.0")?;
    writeln!(out, "comment specimen {}", mesh.specimen_id())?;
    writeln!(out, "element vertex {}", mesh.num_vertices())?;
    writeln!(out, "property double x\nproperty double y\nproperty double z")?;
    writeln!(out, "element face {}", mesh.num_faces())?;
    writeln!(out, "property list uchar int vertex_indices\nend_header")?;
    for v in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e} {:.16e}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI_OFF: &str = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";

    #[test]
    fn single_triangle_off() {
        let m = load_mesh(TRI_OFF.as_bytes(), MeshFormat::Off, "t").unwrap();
        assert_eq!(m.num_vertices(), 3);
        assert_eq!(m.num_faces(), 1);
        assert_eq!(m.edges().len(), 3);
    }

    #[test]
    fn square_off_accepted() {
        let src = "OFF\n# comment\n4 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n3 0 1 2\n3 0 2 3\n";
        let m = load_mesh(src.as_bytes(), MeshFormat::Off, "sq").unwrap();
        assert_eq!(m.num_vertices() as i64 - m.edges().len() as i64 + m.num_faces() as i64, 1);
    }

    #[test]
    fn tetrahedron_is_topology_error() {
        let src = "OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 1 2 3\n3 0 3 2\n";
        let err = load_mesh(src.as_bytes(), MeshFormat::Off, "tet").unwrap_err();
        assert!(matches!(err, Error::Topology(_)), "{err}");
    }

    #[test]
    fn malformed_off_is_parse_error() {
        let err = load_mesh("OFF\n3 1 0\n0 0\n".as_bytes(), MeshFormat::Off, "bad").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        let err = load_mesh("PLY\n".as_bytes(), MeshFormat::Off, "bad").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn ascii_ply_with_extra_properties() {
        let src = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0 9\n1 0 0 9\n0 1 0 9\n3 0 1 2\n";
        let m = load_mesh(src.as_bytes(), MeshFormat::Ply, "p").unwrap();
        assert_eq!(m.vertices()[1], Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn binary_ply() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty double x\nproperty double y\nproperty double z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n".to_vec();
        for v in [[0.0f64, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.5]] {
            for c in v {
                bytes.extend_from_slice(&c.to_le_bytes());
            }
        }
        bytes.push(3);
        for i in [0i32, 1, 2] {
            bytes.extend_from_slice(&i.to_le_bytes());
        }
        let m = load_mesh(bytes.as_slice(), MeshFormat::Ply, "b").unwrap();
        assert_eq!(m.vertices()[2], Vec3::new(0.0, 1.0, 0.5));
        assert_eq!(m.faces()[0], [0, 1, 2]);
    }
}
