//! Geometric prior preparation: scale/shift alignment of dense depth priors
//! against sparse SfM depth, and the masks gating the prior losses
//! (low-texture and confidence).

pub mod canny;

use crate::error::{Error, Result};
use crate::raster::{BoolMap, ScalarMap, VectorMap};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseSample {
    pub u: f64,
    pub v: f64,
    pub depth_m: f64,
}

/// Per-view sparse depth from projected SfM points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseDepth {
    pub view_id: u32,
    pub samples: Vec<SparseSample>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AlignmentParams {
    pub s: f64,
    pub t: f64,
    pub group_id: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Views per alignment group sharing one (s, t).
    pub group_size: usize,
    pub irls_iters: usize,
    pub canny_sigma: f64,
    pub canny_low: f64,
    pub canny_high: f64,
    pub dilate_px: usize,
    pub conf_threshold: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            group_size: 40,
            irls_iters: 10,
            canny_sigma: 1.4,
            canny_low: 0.1,
            canny_high: 0.2,
            dilate_px: 4,
            conf_threshold: 1.5,
        }
    }
}

pub const MIN_ALIGN_SAMPLES: usize = 10;
const IRLS_EPS: f64 = 1e-6;

/// L1 scale/shift fit of dense prior depth against sparse depth over a view
/// group: minimizes sum |sparse - (s * dense + t)|. Solved by iteratively
/// reweighted least squares from the L2 closed form.
pub fn align_scale_shift(
    dense: &[&ScalarMap],
    sparse: &[&SparseDepth],
    irls_iters: usize,
    group_id: u32,
) -> Result<AlignmentParams> {
    assert_eq!(dense.len(), sparse.len());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (map, sd) in dense.iter().zip(sparse) {
        for sample in &sd.samples {
            let d = map.sample_bilinear(sample.u, sample.v);
            if d.is_finite() && sample.depth_m > 0.0 {
                xs.push(d);
                ys.push(sample.depth_m);
            }
        }
    }
    if xs.len() < MIN_ALIGN_SAMPLES {
        return Err(Error::AlignmentFailed {
            needed: MIN_ALIGN_SAMPLES,
            got: xs.len(),
        });
    }

    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let var_x = xs.iter().map(|x| (x - mean_x).powi(2)).sum::<f64>();
    let cov = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum::<f64>();
    if var_x <= 1e-12 {
        return Err(Error::DegenerateAlignment { s: 0.0 });
    }
    let mut s = cov / var_x;
    let mut t = mean_y - s * mean_x;

    for _ in 0..irls_iters {
        let mut a00 = 0.0;
        let mut a01 = 0.0;
        let mut a11 = 0.0;
        let mut b0 = 0.0;
        let mut b1 = 0.0;
        for (&x, &y) in xs.iter().zip(&ys) {
            let r = y - (s * x + t);
            let w = 1.0 / r.abs().max(IRLS_EPS);
            a00 += w * x * x;
            a01 += w * x;
            a11 += w;
            b0 += w * x * y;
            b1 += w * y;
        }
        let det = a00 * a11 - a01 * a01;
        if det.abs() < 1e-18 {
            break;
        }
        s = (b0 * a11 - b1 * a01) / det;
        t = (a00 * b1 - a01 * b0) / det;
    }

    if s <= 0.0 {
        return Err(Error::DegenerateAlignment { s });
    }
    Ok(AlignmentParams { s, t, group_id })
}

/// Aligned prior depth `D_r = s * D_dense + t` (NaN preserved).
pub fn apply_alignment(dense: &ScalarMap, params: &AlignmentParams) -> ScalarMap {
    ScalarMap::from_fn(dense.width(), dense.height(), |u, v| {
        let d = dense.get(u, v);
        if d.is_finite() {
            params.s * d + params.t
        } else {
            f64::NAN
        }
    })
}

/// Low-texture mask: complement of dilated Canny edges of the RGB input.
pub fn low_texture_mask(rgb: &VectorMap, cfg: &PriorConfig) -> BoolMap {
    let luma = ScalarMap::from_fn(rgb.width(), rgb.height(), |u, v| {
        let c = rgb.get(u, v);
        0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z
    });
    let edges = canny::canny_edges(&luma, cfg.canny_sigma, cfg.canny_low, cfg.canny_high);
    let dilated = edges.dilate(cfg.dilate_px);
    BoolMap::from_fn(rgb.width(), rgb.height(), |u, v| !dilated.get(u, v))
}

/// Confidence gating: `conf >= threshold` (NaN confidence fails).
pub fn confidence_mask(conf: &ScalarMap, threshold: f64) -> BoolMap {
    BoolMap::from_fn(conf.width(), conf.height(), |u, v| {
        let c = conf.get(u, v);
        c.is_finite() && c >= threshold
    })
}
