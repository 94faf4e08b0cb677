//! Binary little-endian PLY point clouds (float x/y/z, uchar red/green/blue).

use std::path::Path;

use crate::error::{Error, Result};

use super::PointCloud;

#[derive(Clone, Copy, Debug)]
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

    fn read(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Property {
    name: String,
    ty: ScalarType,
    offset: usize,
}

pub fn ply_bytes(cloud: &PointCloud) -> Vec<u8> {
    let n = cloud.len();
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {n}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n"
    );
    let mut out = Vec::with_capacity(header.len() + n * 15);
    out.extend_from_slice(header.as_bytes());
    for i in 0..n {
        for &c in &cloud.positions[i] {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
        for &c in &cloud.colors[i] {
            out.push((c.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

pub fn write_ply(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    super::bundle::ensure_parent(path)?;
    std::fs::write(path, ply_bytes(cloud)).map_err(|e| Error::io(path, e))
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes, path)
}

pub(crate) fn parse_ply(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let format_err = |reason: String| Error::Format {
        path: path.to_owned(),
        reason,
    };
    let marker = b"end_header\n";
    let header_end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| format_err("missing end_header".into()))?
        + marker.len();
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| format_err("header is not UTF-8".into()))?;

    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(format_err("missing ply signature".into()));
    }
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut props: Vec<Property> = Vec::new();
    let mut stride = 0usize;
    for line in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", other, _] => return Err(format_err(format!("unsupported PLY format {other}"))),
            ["comment", ..] | ["obj_info", ..] | ["end_header"] => {}
            ["element", name, count] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertex_count = Some(count.parse::<usize>().map_err(|_| format_err(format!("bad vertex count {count}")))?);
                } else if vertex_count.is_none() {
                    return Err(format_err("elements before vertex are not supported".into()));
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(format_err("list properties on vertices are not supported".into()))
            }
            ["property", ty, name] if in_vertex => {
                let ty = ScalarType::parse(ty).ok_or_else(|| format_err(format!("unknown property type {ty}")))?;
                props.push(Property {
                    name: name.to_string(),
                    ty,
                    offset: stride,
                });
                stride += ty.size();
            }
            ["property", ..] => {}
            _ => return Err(format_err(format!("unrecognized header line {line:?}"))),
        }
    }
    let n = vertex_count.ok_or_else(|| format_err("no vertex element".into()))?;
    let find = |name: &str| props.iter().find(|p| p.name == name);
    let (x, y, z) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(format_err("vertex element lacks x/y/z".into())),
    };
    let rgb = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    let body = &bytes[header_end..];
    if body.len() < n * stride {
        return Err(format_err(format!(
            "vertex payload holds {} bytes, expected {}",
            body.len(),
            n * stride
        )));
    }
    let mut positions = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    for rec in body[..n * stride].chunks_exact(stride.max(1)).take(n) {
        let read = |p: &Property| p.ty.read(&rec[p.offset..]);
        positions.push([read(x), read(y), read(z)]);
        colors.push(match rgb {
            Some(channels) => channels.map(|p| {
                let v = read(p);
                match p.ty {
                    ScalarType::F32 | ScalarType::F64 => v,
                    ScalarType::U16 => v / 65535.0,
                    _ => v / 255.0,
                }
            }),
            None => [0.0; 3],
        });
    }
    Ok(PointCloud { positions, colors })
}
