//! OBJ and PLY geometry files.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::scanner::mesh::{Geometry, TriangleMesh};
use crate::spatial::{median_spacing, KdTree};

/// Reads `.obj` or `.ply`. Faceless PLY files become point sets whose
/// splat radius is the median point spacing.
pub fn read_geometry(path: &Path) -> Result<Geometry> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let file = std::fs::File::open(path)?;
    let geometry = match ext.as_str() {
        "obj" => Geometry::Mesh(read_obj(BufReader::new(file))?),
        "ply" => read_ply(BufReader::new(file))?,
        _ => return Err(Error::Parse(format!("unsupported geometry file {}", path.display()))),
    };
    if geometry.is_empty() {
        return Err(Error::Parse(format!("{} holds no geometry", path.display())));
    }
    Ok(geometry)
}

pub fn read_obj(reader: impl BufRead) -> Result<TriangleMesh> {
    let mut mesh = TriangleMesh::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let mut it = line.split_whitespace();
        let err = |what: &str| Error::Parse(format!("obj line {}: {what}", lineno + 1));
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|_| err("bad vertex")))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(err("vertex needs three coordinates"));
                }
                mesh.vertices.push(Point::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let n = mesh.vertices.len() as i64;
                let idx: Vec<u32> = it
                    .map(|tok| {
                        let first = tok.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| err("bad face index"))?;
                        let i = if i < 0 { n + i } else { i - 1 };
                        if i < 0 || i >= n {
                            return Err(err("face index out of range"));
                        }
                        Ok(i as u32)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(mesh)
}

pub fn write_obj(mesh: &TriangleMesh, mut w: impl Write) -> Result<()> {
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
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
    fn parse(s: &str) -> Result<Scalar> {
        Ok(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return Err(Error::Parse(format!("unknown ply type {s}"))),
        })
    }

    fn read_le(self, r: &mut impl Read) -> Result<f64> {
        let mut b = [0u8; 8];
        let n = match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        };
        r.read_exact(&mut b[..n])?;
        Ok(match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b),
        })
    }
}

enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

pub fn read_ply(mut reader: impl BufRead) -> Result<Geometry> {
    let perr = |m: &str| Error::Parse(format!("ply: {m}"));
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim() != "ply" {
        return Err(perr("missing magic"));
    }
    let mut binary = false;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(perr("unterminated header"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => binary = false,
            ["format", "binary_little_endian", _] => binary = true,
            ["format", f, ..] => return Err(perr(&format!("unsupported format {f}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| perr("bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => elements
                .last_mut()
                .ok_or_else(|| perr("property before element"))?
                .props
                .push(Property::List(name.to_string(), Scalar::parse(ct)?, Scalar::parse(it)?)),
            ["property", t, name] => elements
                .last_mut()
                .ok_or_else(|| perr("property before element"))?
                .props
                .push(Property::Scalar(name.to_string(), Scalar::parse(t)?)),
            ["end_header"] => break,
            _ => {}
        }
    }

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut tok_pos = 0usize;
    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [0.0f64; 3];
            let mut face: Vec<u32> = Vec::new();
            for prop in &el.props {
                let mut next = |s: Scalar| -> Result<f64> {
                    if binary {
                        s.read_le(&mut reader)
                    } else {
                        while tok_pos >= tokens.len() {
                            line.clear();
                            if reader.read_line(&mut line)? == 0 {
                                return Err(perr("truncated body"));
                            }
                            tokens = line.split_whitespace().map(str::to_string).collect();
                            tok_pos = 0;
                        }
                        tok_pos += 1;
                        tokens[tok_pos - 1].parse::<f64>().map_err(|_| perr("bad number"))
                    }
                };
                match prop {
                    Property::Scalar(name, s) => {
                        let v = next(*s)?;
                        match name.as_str() {
                            "x" => xyz[0] = v,
                            "y" => xyz[1] = v,
                            "z" => xyz[2] = v,
                            _ => {}
                        }
                    }
                    Property::List(name, ct, it) => {
                        let n = next(*ct)? as usize;
                        let vals = (0..n).map(|_| next(*it)).collect::<Result<Vec<f64>>>()?;
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            face = vals.iter().map(|v| *v as u32).collect();
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => vertices.push(Point::from_array(xyz)),
                "face" if face.len() >= 3 => {
                    for k in 1..face.len() - 1 {
                        triangles.push([face[0], face[k], face[k + 1]]);
                    }
                }
                _ => {}
            }
        }
    }
    if triangles.iter().flatten().any(|&i| i as usize >= vertices.len()) {
        return Err(perr("face index out of range"));
    }
    if triangles.is_empty() {
        let tree = KdTree::new(&vertices);
        let radius = median_spacing(&vertices, &tree).max(1e-3);
        Ok(Geometry::Points { points: vertices, radius })
    } else {
        Ok(Geometry::Mesh(TriangleMesh { vertices, triangles }))
    }
}

/// ASCII PLY of bare points.
pub fn write_ply_points(points: &[Point], mut w: impl Write) -> Result<()> {
    writeln!(w, "ply\nformat ascii 1.0\nelement vertex {}", points.len())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z\nend_header")?;
    for p in points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}
