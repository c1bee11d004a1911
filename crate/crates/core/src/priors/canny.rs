//! Canny edge detection from scratch on a [0,1] luma raster: Gaussian blur,
//! Sobel gradients, non-maximum suppression along the quantized gradient
//! direction, and two-threshold hysteresis.

use crate::raster::{BoolMap, ScalarMap};

pub fn canny_edges(luma: &ScalarMap, sigma: f64, low: f64, high: f64) -> BoolMap {
    assert!(high >= low);
    let (w, h) = (luma.width(), luma.height());
    let blurred = gaussian_blur(luma, sigma);

    // Sobel gradients; border pixels keep zero gradient
    let mut gx = ScalarMap::filled(w, h, 0.0);
    let mut gy = ScalarMap::filled(w, h, 0.0);
    let mut mag = ScalarMap::filled(w, h, 0.0);
    for v in 1..h.saturating_sub(1) {
        for u in 1..w.saturating_sub(1) {
            let s = |du: isize, dv: isize| {
                blurred.get((u as isize + du) as usize, (v as isize + dv) as usize)
            };
            let dx = (s(1, -1) + 2.0 * s(1, 0) + s(1, 1)) - (s(-1, -1) + 2.0 * s(-1, 0) + s(-1, 1));
            let dy = (s(-1, 1) + 2.0 * s(0, 1) + s(1, 1)) - (s(-1, -1) + 2.0 * s(0, -1) + s(1, -1));
            gx.set(u, v, dx);
            gy.set(u, v, dy);
            mag.set(u, v, dx.hypot(dy));
        }
    }

    // non-maximum suppression against the two neighbors along the gradient
    let mut thin = ScalarMap::filled(w, h, 0.0);
    for v in 1..h.saturating_sub(1) {
        for u in 1..w.saturating_sub(1) {
            let m = mag.get(u, v);
            if m <= 0.0 {
                continue;
            }
            let (dx, dy) = (gx.get(u, v), gy.get(u, v));
            let angle = dy.atan2(dx).to_degrees();
            let angle = if angle < 0.0 { angle + 180.0 } else { angle };
            let (du, dv): (isize, isize) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let a = mag.get((u as isize + du) as usize, (v as isize + dv) as usize);
            let b = mag.get((u as isize - du) as usize, (v as isize - dv) as usize);
            if m >= a && m >= b {
                thin.set(u, v, m);
            }
        }
    }

    // hysteresis: strong edges seed a flood fill through weak edges
    let mut edges = BoolMap::filled(w, h, false);
    let mut stack = Vec::new();
    for v in 0..h {
        for u in 0..w {
            if thin.get(u, v) >= high && !edges.get(u, v) {
                edges.set(u, v, true);
                stack.push((u, v));
                while let Some((cu, cv)) = stack.pop() {
                    for dv in -1isize..=1 {
                        for du in -1isize..=1 {
                            let (nu, nv) = (cu as isize + du, cv as isize + dv);
                            if nu < 0 || nv < 0 || nu as usize >= w || nv as usize >= h {
                                continue;
                            }
                            let (nu, nv) = (nu as usize, nv as usize);
                            if !edges.get(nu, nv) && thin.get(nu, nv) >= low {
                                edges.set(nu, nv, true);
                                stack.push((nu, nv));
                            }
                        }
                    }
                }
            }
        }
    }
    edges
}

/// Separable Gaussian blur with clamp-to-edge padding.
pub fn gaussian_blur(map: &ScalarMap, sigma: f64) -> ScalarMap {
    if sigma <= 0.0 {
        return map.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for k in -radius..=radius {
        kernel.push((-(k * k) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in kernel.iter_mut() {
        *k /= sum;
    }
    let (w, h) = (map.width(), map.height());
    let horizontal = ScalarMap::from_fn(w, h, |u, v| {
        let mut acc = 0.0;
        for (i, &kv) in kernel.iter().enumerate() {
            let uu = (u as isize + i as isize - radius).clamp(0, w as isize - 1) as usize;
            acc += kv * map.get(uu, v);
        }
        acc
    });
    ScalarMap::from_fn(w, h, |u, v| {
        let mut acc = 0.0;
        for (i, &kv) in kernel.iter().enumerate() {
            let vv = (v as isize + i as isize - radius).clamp(0, h as isize - 1) as usize;
            acc += kv * horizontal.get(u, vv);
        }
        acc
    })
}
