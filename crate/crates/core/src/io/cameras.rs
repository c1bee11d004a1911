//! Camera set JSON:
//! `{"views":[{"id", "width", "height", "K":[9 row-major], "R":[9], "t":[3]}]}`

use crate::error::{Error, Result};
use crate::geometry::CameraView;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct CameraFile {
    views: Vec<CameraRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CameraRecord {
    id: u32,
    width: usize,
    height: usize,
    #[serde(rename = "K")]
    k: [f64; 9],
    #[serde(rename = "R")]
    r: [f64; 9],
    t: [f64; 3],
}

pub fn write_cameras(path: &Path, cams: &[CameraView]) -> Result<()> {
    let file = CameraFile {
        views: cams
            .iter()
            .map(|c| {
                let mut k = [0.0; 9];
                let mut r = [0.0; 9];
                for row in 0..3 {
                    for col in 0..3 {
                        k[row * 3 + col] = c.k()[(row, col)];
                        r[row * 3 + col] = c.r()[(row, col)];
                    }
                }
                CameraRecord {
                    id: c.id,
                    width: c.width,
                    height: c.height,
                    k,
                    r,
                    t: [c.t().x, c.t().y, c.t().z],
                }
            })
            .collect(),
    };
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn read_cameras(path: &Path) -> Result<Vec<CameraView>> {
    let text = fs::read_to_string(path).map_err(|e| Error::FileFormat {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let file: CameraFile = serde_json::from_str(&text)?;
    file.views
        .iter()
        .map(|rec| {
            CameraView::new(
                rec.id,
                Matrix3::from_row_slice(&rec.k),
                Matrix3::from_row_slice(&rec.r),
                Vector3::new(rec.t[0], rec.t[1], rec.t[2]),
                rec.width,
                rec.height,
            )
        })
        .collect()
}
