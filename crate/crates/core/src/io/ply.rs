//! Binary little-endian PLY I/O.
//!
//! Scene checkpoints store one vertex per Gaussian with double-precision
//! properties `x y z log_s1 log_s2 log_s3 qw qx qy qz opacity_logit r g b`.
//! Meshes store float vertices (optionally with normals and uchar colors)
//! and uint32 face index lists.

use crate::error::{Error, Result};
use crate::fusion::Mesh;
use crate::splat::{Gaussian, GaussianScene};
use nalgebra::{Vector3, Vector4};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

const SPLAT_PROPS: [&str; 14] = [
    "x",
    "y",
    "z",
    "log_s1",
    "log_s2",
    "log_s3",
    "qw",
    "qx",
    "qy",
    "qz",
    "opacity_logit",
    "r",
    "g",
    "b",
];

pub fn write_splats(path: &Path, scene: &GaussianScene) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\ncomment gaussian scene checkpoint\nelement vertex {}\n",
        scene.len()
    )?;
    for p in SPLAT_PROPS {
        writeln!(out, "property double {p}")?;
    }
    writeln!(out, "end_header")?;
    for i in 0..scene.len() {
        let g = scene.get(i);
        let vals = [
            g.mu.x,
            g.mu.y,
            g.mu.z,
            g.log_scale.x,
            g.log_scale.y,
            g.log_scale.z,
            g.rot[0],
            g.rot[1],
            g.rot[2],
            g.rot[3],
            g.opacity_logit,
            g.rgb.x,
            g.rgb.y,
            g.rgb.z,
        ];
        for v in vals {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_splats(path: &Path) -> Result<GaussianScene> {
    let bytes = fs::read(path)?;
    let bad = |msg: &str| Error::FileFormat {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let header_end = find_header_end(&bytes).ok_or_else(|| bad("missing end_header"))?;
    let header = String::from_utf8_lossy(&bytes[..header_end]);
    let mut count = 0usize;
    let mut props = Vec::new();
    for line in header.lines() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("element") => {
                if tok.next() == Some("vertex") {
                    count = tok
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("bad vertex count"))?;
                }
            }
            Some("property") => {
                let ty = tok.next().unwrap_or("");
                let name = tok.next().unwrap_or("");
                if ty != "double" {
                    return Err(bad(&format!("checkpoint property {name} must be double")));
                }
                props.push(name.to_string());
            }
            _ => {}
        }
    }
    if props != SPLAT_PROPS {
        return Err(bad("unexpected checkpoint property layout"));
    }
    let need = header_end + count * 14 * 8;
    if bytes.len() < need {
        return Err(bad("truncated checkpoint payload"));
    }
    let mut scene = GaussianScene::new();
    let mut off = header_end;
    let mut next = || {
        let v = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        off += 8;
        v
    };
    for _ in 0..count {
        let vals: Vec<f64> = (0..14).map(|_| next()).collect();
        scene.push(Gaussian {
            mu: Vector3::new(vals[0], vals[1], vals[2]),
            log_scale: Vector3::new(vals[3], vals[4], vals[5]),
            rot: Vector4::new(vals[6], vals[7], vals[8], vals[9]),
            opacity_logit: vals[10],
            rgb: Vector3::new(vals[11], vals[12], vals[13]),
        });
    }
    Ok(scene)
}

pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    mesh.validate()?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    let with_colors = mesh.colors.is_some();
    let with_normals = mesh.normals.is_some();
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        mesh.vertices.len()
    )?;
    if with_normals {
        write!(out, "property float nx\nproperty float ny\nproperty float nz\n")?;
    }
    if with_colors {
        write!(out, "property uchar red\nproperty uchar green\nproperty uchar blue\n")?;
    }
    write!(
        out,
        "element face {}\nproperty list uchar uint vertex_indices\nend_header\n",
        mesh.triangles.len()
    )?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        for c in 0..3 {
            out.write_all(&(v[c] as f32).to_le_bytes())?;
        }
        if let Some(ns) = &mesh.normals {
            for c in 0..3 {
                out.write_all(&(ns[i][c] as f32).to_le_bytes())?;
            }
        }
        if let Some(cs) = &mesh.colors {
            for c in 0..3 {
                out.write_all(&[(cs[i][c].clamp(0.0, 1.0) * 255.0).round() as u8])?;
            }
        }
    }
    for t in &mesh.triangles {
        out.write_all(&[3u8])?;
        for &i in t {
            out.write_all(&i.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let bytes = fs::read(path)?;
    let bad = |msg: &str| Error::FileFormat {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let header_end = find_header_end(&bytes).ok_or_else(|| bad("missing end_header"))?;
    let header = String::from_utf8_lossy(&bytes[..header_end]);

    #[derive(PartialEq)]
    enum Elem {
        Vertex,
        Face,
        Other,
    }
    let mut n_vertices = 0usize;
    let mut n_faces = 0usize;
    let mut vertex_props: Vec<(String, usize)> = Vec::new(); // (name, byte size)
    let mut current = Elem::Other;
    for line in header.lines() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("binary_little_endian") {
                    return Err(bad("only binary little-endian PLY supported"));
                }
            }
            Some("element") => match tok.next() {
                Some("vertex") => {
                    current = Elem::Vertex;
                    n_vertices = tok.next().and_then(|s| s.parse().ok()).unwrap_or(0);
                }
                Some("face") => {
                    current = Elem::Face;
                    n_faces = tok.next().and_then(|s| s.parse().ok()).unwrap_or(0);
                }
                _ => current = Elem::Other,
            },
            Some("property") => {
                let ty = tok.next().unwrap_or("");
                if current == Elem::Vertex {
                    let size = match ty {
                        "float" | "float32" | "int" | "uint" | "int32" | "uint32" => 4,
                        "double" | "float64" => 8,
                        "uchar" | "uint8" | "char" | "int8" => 1,
                        "short" | "ushort" => 2,
                        "list" => return Err(bad("list property on vertices unsupported")),
                        other => return Err(bad(&format!("unknown property type {other}"))),
                    };
                    vertex_props.push((tok.next().unwrap_or("").to_string(), size));
                } else if current == Elem::Face && ty != "list" {
                    return Err(bad("face element must be an index list"));
                }
            }
            _ => {}
        }
    }

    let stride: usize = vertex_props.iter().map(|(_, s)| s).sum();
    let mut vertices = Vec::with_capacity(n_vertices);
    let mut off = header_end;
    let read_scalar = |bytes: &[u8], off: usize, size: usize| -> f64 {
        match size {
            4 => f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64,
            8 => f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()),
            1 => bytes[off] as f64,
            2 => u16::from_le_bytes(bytes[off..off + 2].try_into().unwrap()) as f64,
            _ => f64::NAN,
        }
    };
    for _ in 0..n_vertices {
        if off + stride > bytes.len() {
            return Err(bad("truncated vertex payload"));
        }
        let mut xyz = [0.0f64; 3];
        let mut field_off = off;
        for (name, size) in &vertex_props {
            match name.as_str() {
                "x" => xyz[0] = read_scalar(&bytes, field_off, *size),
                "y" => xyz[1] = read_scalar(&bytes, field_off, *size),
                "z" => xyz[2] = read_scalar(&bytes, field_off, *size),
                _ => {}
            }
            field_off += size;
        }
        vertices.push(Vector3::new(xyz[0], xyz[1], xyz[2]));
        off += stride;
    }
    let mut triangles = Vec::with_capacity(n_faces);
    for _ in 0..n_faces {
        if off >= bytes.len() {
            return Err(bad("truncated face payload"));
        }
        let n = bytes[off] as usize;
        off += 1;
        if off + 4 * n > bytes.len() {
            return Err(bad("truncated face payload"));
        }
        let mut idx = Vec::with_capacity(n);
        for k in 0..n {
            idx.push(u32::from_le_bytes(
                bytes[off + 4 * k..off + 4 * k + 4].try_into().unwrap(),
            ));
        }
        off += 4 * n;
        // fan-triangulate polygons
        for k in 1..n.saturating_sub(1) {
            triangles.push([idx[0], idx[k], idx[k + 1]]);
        }
    }
    let mesh = Mesh {
        vertices,
        triangles,
        normals: None,
        colors: None,
    };
    mesh.validate()?;
    Ok(mesh)
}

fn find_header_end(bytes: &[u8]) -> Option<usize> {
    let needle = b"end_header\n";
    bytes
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + needle.len())
}
