//! PNG-backed rasters: 8-bit masks (255 = in mask), 16-bit label maps,
//! and 8-bit RGB images mapped to [0,1].

use crate::error::{Error, Result};
use crate::raster::{BoolMap, VectorMap};
use image::{GrayImage, ImageBuffer, Luma, RgbImage};
use nalgebra::Vector3;
use std::path::Path;

pub fn write_mask(path: &Path, mask: &BoolMap) -> Result<()> {
    let img = GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |u, v| {
        Luma([if mask.get(u as usize, v as usize) { 255 } else { 0 }])
    });
    img.save(path)?;
    Ok(())
}

pub fn read_mask(path: &Path) -> Result<BoolMap> {
    let img = image::open(path)?.to_luma8();
    Ok(BoolMap::from_fn(
        img.width() as usize,
        img.height() as usize,
        |u, v| img.get_pixel(u as u32, v as u32)[0] >= 128,
    ))
}

/// Label raster as 16-bit grayscale PNG (label 0 = unlabeled).
pub fn write_labels(path: &Path, labels: &[u32], width: usize, height: usize) -> Result<()> {
    assert_eq!(labels.len(), width * height);
    if let Some(&max) = labels.iter().max() {
        if max > u16::MAX as u32 {
            return Err(Error::InvalidConfig(format!(
                "label id {max} exceeds 16-bit PNG range"
            )));
        }
    }
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(width as u32, height as u32, |u, v| {
            Luma([labels[v as usize * width + u as usize] as u16])
        });
    img.save(path)?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<(Vec<u32>, usize, usize)> {
    let img = image::open(path)?.to_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut labels = vec![0u32; w * h];
    for v in 0..h {
        for u in 0..w {
            labels[v * w + u] = img.get_pixel(u as u32, v as u32)[0] as u32;
        }
    }
    Ok((labels, w, h))
}

pub fn write_rgb(path: &Path, rgb: &VectorMap) -> Result<()> {
    let img = RgbImage::from_fn(rgb.width() as u32, rgb.height() as u32, |u, v| {
        let c = rgb.get(u as usize, v as usize);
        image::Rgb([quantize(c.x), quantize(c.y), quantize(c.z)])
    });
    img.save(path)?;
    Ok(())
}

fn quantize(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn read_rgb(path: &Path) -> Result<VectorMap> {
    let img = image::open(path)?.to_rgb8();
    Ok(VectorMap::from_fn(
        img.width() as usize,
        img.height() as usize,
        |u, v| {
            let p = img.get_pixel(u as u32, v as u32);
            Vector3::new(
                p[0] as f64 / 255.0,
                p[1] as f64 / 255.0,
                p[2] as f64 / 255.0,
            )
        },
    ))
}

/// Grayscale heatmap in [0,1] as an 8-bit PNG (NaN renders as 0).
pub fn write_gray(path: &Path, values: &crate::raster::ScalarMap) -> Result<()> {
    let img = GrayImage::from_fn(values.width() as u32, values.height() as u32, |u, v| {
        let x = values.get(u as usize, v as usize);
        Luma([if x.is_finite() { quantize(x) } else { 0 }])
    });
    img.save(path)?;
    Ok(())
}
