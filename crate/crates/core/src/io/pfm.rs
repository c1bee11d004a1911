//! PFM raster I/O. Grayscale (`Pf`) for depth/confidence/plane-distance,
//! 3-channel (`PF`) for normals and color. Scale is written as -1.0
//! (little-endian); rows are stored bottom-to-top as the format requires.

use crate::error::{Error, Result};
use crate::raster::{ScalarMap, VectorMap};
use nalgebra::Vector3;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

pub fn write_scalar(path: &Path, map: &ScalarMap) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write!(out, "Pf\n{} {}\n-1.0\n", map.width(), map.height())?;
    for v in (0..map.height()).rev() {
        for u in 0..map.width() {
            out.write_all(&(map.get(u, v) as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_vector(path: &Path, map: &VectorMap) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write!(out, "PF\n{} {}\n-1.0\n", map.width(), map.height())?;
    for v in (0..map.height()).rev() {
        for u in 0..map.width() {
            let p = map.get(u, v);
            for c in 0..3 {
                out.write_all(&(p[c] as f32).to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

struct PfmHeader {
    color: bool,
    width: usize,
    height: usize,
    little_endian: bool,
    data_offset: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<PfmHeader> {
    let bad = |msg: &str| Error::FileFormat {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    // header is three whitespace-separated tokens ending in a single newline
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            break;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).to_string());
        if tokens.len() == 4 {
            pos += 1; // single whitespace after the scale token
        }
    }
    if tokens.len() != 4 {
        return Err(bad("truncated PFM header"));
    }
    let color = match tokens[0].as_str() {
        "PF" => true,
        "Pf" => false,
        other => return Err(bad(&format!("bad PFM magic `{other}`"))),
    };
    let width: usize = tokens[1].parse().map_err(|_| bad("bad width"))?;
    let height: usize = tokens[2].parse().map_err(|_| bad("bad height"))?;
    let scale: f64 = tokens[3].parse().map_err(|_| bad("bad scale"))?;
    Ok(PfmHeader {
        color,
        width,
        height,
        little_endian: scale < 0.0,
        data_offset: pos,
    })
}

fn read_samples(path: &Path, bytes: &[u8], h: &PfmHeader, channels: usize) -> Result<Vec<f32>> {
    let n = h.width * h.height * channels;
    let need = h.data_offset + 4 * n;
    if bytes.len() < need {
        return Err(Error::FileFormat {
            path: path.to_path_buf(),
            msg: format!("expected {need} bytes, file has {}", bytes.len()),
        });
    }
    let mut vals = Vec::with_capacity(n);
    for i in 0..n {
        let o = h.data_offset + 4 * i;
        let raw: [u8; 4] = bytes[o..o + 4].try_into().unwrap();
        vals.push(if h.little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        });
    }
    Ok(vals)
}

pub fn read_scalar(path: &Path) -> Result<ScalarMap> {
    let bytes = fs::read(path)?;
    let h = parse_header(path, &bytes)?;
    if h.color {
        return Err(Error::FileFormat {
            path: path.to_path_buf(),
            msg: "expected grayscale PFM, got color".into(),
        });
    }
    let vals = read_samples(path, &bytes, &h, 1)?;
    let mut map = ScalarMap::filled(h.width, h.height, 0.0);
    for (row, chunk) in vals.chunks(h.width).enumerate() {
        let v = h.height - 1 - row;
        for (u, &x) in chunk.iter().enumerate() {
            map.set(u, v, x as f64);
        }
    }
    Ok(map)
}

pub fn read_vector(path: &Path) -> Result<VectorMap> {
    let bytes = fs::read(path)?;
    let h = parse_header(path, &bytes)?;
    if !h.color {
        return Err(Error::FileFormat {
            path: path.to_path_buf(),
            msg: "expected 3-channel PFM, got grayscale".into(),
        });
    }
    let vals = read_samples(path, &bytes, &h, 3)?;
    let mut map = VectorMap::invalid(h.width, h.height);
    for row in 0..h.height {
        let v = h.height - 1 - row;
        for u in 0..h.width {
            let o = (row * h.width + u) * 3;
            map.set(
                u,
                v,
                Vector3::new(vals[o] as f64, vals[o + 1] as f64, vals[o + 2] as f64),
            );
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::env;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = env::temp_dir().join("planesplat_pfm_tests");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn scalar_roundtrip_preserves_nan() {
        let mut m = ScalarMap::from_fn(7, 5, |u, v| (u * 10 + v) as f64 * 0.25);
        m.set(3, 2, f64::NAN);
        let p = tmp("scalar.pfm");
        write_scalar(&p, &m).unwrap();
        let r = read_scalar(&p).unwrap();
        assert_eq!(r.width(), 7);
        assert_eq!(r.height(), 5);
        for v in 0..5 {
            for u in 0..7 {
                if u == 3 && v == 2 {
                    assert!(r.get(u, v).is_nan());
                } else {
                    assert_eq!(r.get(u, v), m.get(u, v));
                }
            }
        }
    }

    #[test]
    fn vector_roundtrip() {
        let m = VectorMap::from_fn(4, 3, |u, v| {
            Vector3::new(u as f64, v as f64, (u + v) as f64 * 0.5)
        });
        let p = tmp("vector.pfm");
        write_vector(&p, &m).unwrap();
        let r = read_vector(&p).unwrap();
        assert_eq!(r, m);
    }

    #[test]
    fn rejects_wrong_kind() {
        let m = ScalarMap::filled(2, 2, 1.0);
        let p = tmp("kind.pfm");
        write_scalar(&p, &m).unwrap();
        assert!(read_vector(&p).is_err());
    }
}
