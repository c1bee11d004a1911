//! Loss terms driving the optimization: photometric (L1 + D-SSIM), Gaussian
//! flattening, depth-normal consistency, co-planarity against per-region
//! least-squares plane fits, and the prior depth / prior normal constraints.
//! Each term comes with the analytic gradients needed to reach the renderer's
//! channel gradients.

pub mod ssim;

use crate::error::{Error, Result};
use crate::geometry::{back_project_value, CameraView};
use crate::lp3::PlaneLabelMap;
use crate::raster::{BoolMap, ScalarMap, VectorMap};
use crate::render::{ChannelGrads, RenderOutput, ACC_MIN};
use crate::splat::GaussianScene;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Ridge term in the plane-fit normal equations.
pub const PLANE_FIT_EPS: f64 = 1e-6;
/// L1 / D-SSIM mix of the photometric loss.
const RGB_L1_WEIGHT: f64 = 0.8;
const RGB_SSIM_WEIGHT: f64 = 0.2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlaneParams {
    /// Plane parameter A with `A . P = 1` in the view's camera frame.
    pub a: [f64; 3],
    pub plane_id: u32,
    pub view_id: u32,
    pub inlier_count: usize,
}

impl PlaneParams {
    pub fn a_vec(&self) -> Vector3<f64> {
        Vector3::new(self.a[0], self.a[1], self.a[2])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PlaneFit {
    pub a: Vector3<f64>,
    /// True when the normal equations were rank-deficient and the ridge term
    /// dominated the solve.
    pub degenerate: bool,
}

/// Least-squares plane through `points` solving `Q A = 1` with a ridge term:
/// `A = (Q^T Q + eps E)^{-1} Q^T 1`.
pub fn fit_plane(points: &[Vector3<f64>], eps: f64) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let mut qtq = Matrix3::zeros();
    let mut qty = Vector3::zeros();
    for p in points {
        qtq += p * p.transpose();
        qty += p;
    }
    let eig = qtq.symmetric_eigen();
    let max_l = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let min_l = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let degenerate = min_l <= 1e-9 * max_l.max(1.0);
    let m = qtq + Matrix3::identity() * eps;
    let a = m
        .try_inverse()
        .ok_or(Error::InsufficientPoints {
            needed: 3,
            got: points.len(),
        })?
        * qty;
    Ok(PlaneFit { a, degenerate })
}

/// Planar depth from a fitted plane: `D_p(p) = 1 / (A . K^{-1} p~)`.
/// NaN where the denominator is near zero or the depth is non-positive.
pub fn planar_depth_at(a: &Vector3<f64>, cam: &CameraView, u: f64, v: f64) -> f64 {
    let denom = a.dot(&cam.ray_dir(u, v));
    if denom.abs() < 1e-9 {
        return f64::NAN;
    }
    let d = 1.0 / denom;
    if d <= 0.0 {
        f64::NAN
    } else {
        d
    }
}

pub fn planar_depth(a: &Vector3<f64>, cam: &CameraView) -> ScalarMap {
    ScalarMap::from_fn(cam.width, cam.height, |u, v| {
        planar_depth_at(a, cam, u as f64, v as f64)
    })
}

#[derive(Debug, Clone, Default)]
pub struct Coplanarity {
    pub loss: f64,
    pub pixel_count: usize,
    pub params: Vec<PlaneParams>,
    /// Labels whose fit failed (too few valid pixels or degenerate).
    pub skipped: Vec<u32>,
}

/// Co-planarity penalty of rendered depth: per labeled region, back-project
/// the rendered depth, fit a plane, and take the mean |D_p - D_hat| over the
/// region's valid pixels. Plane parameters are treated as constants by the
/// backward pass.
pub fn coplanarity_loss(
    depth: &ScalarMap,
    labels: &PlaneLabelMap,
    cam: &CameraView,
) -> Coplanarity {
    let mut out = Coplanarity::default();
    let mut fitted = Vec::new();
    for info in &labels.meta {
        let pixels = labels.pixels_of(info.id);
        let mut points = Vec::new();
        for &idx in &pixels {
            let (u, v) = (idx as usize % labels.width(), idx as usize / labels.width());
            let d = depth.get(u, v);
            if d.is_finite() && d > 0.0 {
                points.push(back_project_value(d, cam, u as f64, v as f64));
            }
        }
        if points.len() < 3 {
            out.skipped.push(info.id);
            continue;
        }
        match fit_plane(&points, PLANE_FIT_EPS) {
            Ok(fit) if !fit.degenerate => fitted.push(PlaneParams {
                a: fit.a.into(),
                plane_id: info.id,
                view_id: cam.id,
                inlier_count: points.len(),
            }),
            _ => out.skipped.push(info.id),
        }
    }
    let (loss, count) = coplanarity_with_params(depth, labels, cam, &fitted);
    out.loss = loss;
    out.pixel_count = count;
    out.params = fitted;
    out
}

/// Co-planarity value against fixed plane parameters (the differentiation
/// semantics of the loss: the refit is not part of the gradient).
pub fn coplanarity_with_params(
    depth: &ScalarMap,
    labels: &PlaneLabelMap,
    cam: &CameraView,
    params: &[PlaneParams],
) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0usize;
    for pp in params {
        let a = pp.a_vec();
        for &idx in &labels.pixels_of(pp.plane_id) {
            let (u, v) = (idx as usize % labels.width(), idx as usize / labels.width());
            let d_hat = depth.get(u, v);
            if !(d_hat.is_finite() && d_hat > 0.0) {
                continue;
            }
            let d_p = planar_depth_at(&a, cam, u as f64, v as f64);
            if !d_p.is_finite() {
                continue;
            }
            sum += (d_p - d_hat).abs();
            count += 1;
        }
    }
    if count == 0 {
        (0.0, 0)
    } else {
        (sum / count as f64, count)
    }
}

/// d l_p / d depth, with plane parameters fixed.
pub fn coplanarity_backward(
    depth: &ScalarMap,
    labels: &PlaneLabelMap,
    cam: &CameraView,
    params: &[PlaneParams],
    pixel_count: usize,
) -> ScalarMap {
    let mut g = ScalarMap::filled(depth.width(), depth.height(), 0.0);
    if pixel_count == 0 {
        return g;
    }
    let inv_n = 1.0 / pixel_count as f64;
    for pp in params {
        let a = pp.a_vec();
        for &idx in &labels.pixels_of(pp.plane_id) {
            let (u, v) = (idx as usize % labels.width(), idx as usize / labels.width());
            let d_hat = depth.get(u, v);
            if !(d_hat.is_finite() && d_hat > 0.0) {
                continue;
            }
            let d_p = planar_depth_at(&a, cam, u as f64, v as f64);
            if !d_p.is_finite() {
                continue;
            }
            g.set(u, v, g.get(u, v) - (d_p - d_hat).signum() * inv_n);
        }
    }
    g
}

/// Prior depth constraint: mean squared error over lt AND conf AND valid.
pub fn prior_depth_loss(
    rendered: &ScalarMap,
    prior: &ScalarMap,
    lt: &BoolMap,
    conf: &BoolMap,
) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in 0..rendered.height() {
        for u in 0..rendered.width() {
            if lt.get(u, v) && conf.get(u, v) && rendered.is_valid(u, v) && prior.is_valid(u, v) {
                let r = prior.get(u, v) - rendered.get(u, v);
                sum += r * r;
                count += 1;
            }
        }
    }
    if count == 0 {
        (0.0, 0)
    } else {
        (sum / count as f64, count)
    }
}

pub fn prior_depth_backward(
    rendered: &ScalarMap,
    prior: &ScalarMap,
    lt: &BoolMap,
    conf: &BoolMap,
    count: usize,
) -> ScalarMap {
    let mut g = ScalarMap::filled(rendered.width(), rendered.height(), 0.0);
    if count == 0 {
        return g;
    }
    let inv_n = 1.0 / count as f64;
    for v in 0..rendered.height() {
        for u in 0..rendered.width() {
            if lt.get(u, v) && conf.get(u, v) && rendered.is_valid(u, v) && prior.is_valid(u, v) {
                g.set(
                    u,
                    v,
                    -2.0 * (prior.get(u, v) - rendered.get(u, v)) * inv_n,
                );
            }
        }
    }
    g
}

/// Prior normal constraint over plane regions: mean of
/// `|N_dr - N_d|_1 + (1 - N_dr . N_d)`.
pub fn prior_normal_loss(
    surf_normal: &VectorMap,
    prior_normal: &VectorMap,
    labels: &PlaneLabelMap,
) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in 0..surf_normal.height() {
        for u in 0..surf_normal.width() {
            if labels.get(u, v) > 0 && surf_normal.is_valid(u, v) && prior_normal.is_valid(u, v) {
                let nd = surf_normal.get(u, v);
                let nr = prior_normal.get(u, v);
                sum += (nr - nd).abs().sum() + (1.0 - nr.dot(&nd));
                count += 1;
            }
        }
    }
    if count == 0 {
        (0.0, 0)
    } else {
        (sum / count as f64, count)
    }
}

/// d l_rn / d surf_normal.
pub fn prior_normal_backward(
    surf_normal: &VectorMap,
    prior_normal: &VectorMap,
    labels: &PlaneLabelMap,
    count: usize,
) -> VectorMap {
    let mut g = VectorMap::filled(surf_normal.width(), surf_normal.height(), Vector3::zeros());
    if count == 0 {
        return g;
    }
    let inv_n = 1.0 / count as f64;
    for v in 0..surf_normal.height() {
        for u in 0..surf_normal.width() {
            if labels.get(u, v) > 0 && surf_normal.is_valid(u, v) && prior_normal.is_valid(u, v) {
                let nd = surf_normal.get(u, v);
                let nr = prior_normal.get(u, v);
                let d_l1 = (nr - nd).map(|x| -x.signum());
                g.set(u, v, (d_l1 - nr) * inv_n);
            }
        }
    }
    g
}

/// Depth-normal consistency: mean `|N_d - N|_1` over low-texture pixels.
/// Returns the loss, the gradient factor map for each side, and the count.
pub fn dn_consistency_loss(
    surf_normal: &VectorMap,
    gs_normal_unit: &VectorMap,
    lt: &BoolMap,
) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in 0..surf_normal.height() {
        for u in 0..surf_normal.width() {
            if lt.get(u, v) && surf_normal.is_valid(u, v) && gs_normal_unit.is_valid(u, v) {
                sum += (surf_normal.get(u, v) - gs_normal_unit.get(u, v)).abs().sum();
                count += 1;
            }
        }
    }
    if count == 0 {
        (0.0, 0)
    } else {
        (sum / count as f64, count)
    }
}

/// Gradients of the depth-normal consistency term for both inputs.
pub fn dn_consistency_backward(
    surf_normal: &VectorMap,
    gs_normal_unit: &VectorMap,
    lt: &BoolMap,
    count: usize,
) -> (VectorMap, VectorMap) {
    let (w, h) = (surf_normal.width(), surf_normal.height());
    let mut g_surf = VectorMap::filled(w, h, Vector3::zeros());
    let mut g_gs = VectorMap::filled(w, h, Vector3::zeros());
    if count == 0 {
        return (g_surf, g_gs);
    }
    let inv_n = 1.0 / count as f64;
    for v in 0..h {
        for u in 0..w {
            if lt.get(u, v) && surf_normal.is_valid(u, v) && gs_normal_unit.is_valid(u, v) {
                let s = (surf_normal.get(u, v) - gs_normal_unit.get(u, v)).map(f64::signum);
                g_surf.set(u, v, s * inv_n);
                g_gs.set(u, v, -s * inv_n);
            }
        }
    }
    (g_surf, g_gs)
}

/// Photometric loss `0.8 L1 + 0.2 (1 - SSIM)`.
pub fn rgb_loss(rendered: &VectorMap, target: &VectorMap) -> f64 {
    rgb_loss_impl(rendered, target, false).0
}

pub fn rgb_loss_with_grad(rendered: &VectorMap, target: &VectorMap) -> (f64, VectorMap) {
    let (v, g) = rgb_loss_impl(rendered, target, true);
    (v, g.unwrap())
}

fn rgb_loss_impl(
    rendered: &VectorMap,
    target: &VectorMap,
    want_grad: bool,
) -> (f64, Option<VectorMap>) {
    let (w, h) = (rendered.width(), rendered.height());
    let n = (w * h * 3) as f64;
    let mut l1 = 0.0;
    for v in 0..h {
        for u in 0..w {
            l1 += (rendered.get(u, v) - target.get(u, v)).abs().sum();
        }
    }
    l1 /= n;
    if want_grad {
        let (s, s_grad) = ssim::ssim_with_grad(rendered, target);
        let value = RGB_L1_WEIGHT * l1 + RGB_SSIM_WEIGHT * (1.0 - s);
        let grad = VectorMap::from_fn(w, h, |u, v| {
            let sign = (rendered.get(u, v) - target.get(u, v)).map(f64::signum);
            sign * (RGB_L1_WEIGHT / n) - s_grad.get(u, v) * RGB_SSIM_WEIGHT
        });
        (value, Some(grad))
    } else {
        let s = ssim::ssim(rendered, target);
        (RGB_L1_WEIGHT * l1 + RGB_SSIM_WEIGHT * (1.0 - s), None)
    }
}

/// Flattening pressure: mean over Gaussians of the minimum scale.
pub fn flatten_loss(scene: &GaussianScene) -> f64 {
    if scene.is_empty() {
        return 0.0;
    }
    let sum: f64 = scene
        .log_scale
        .iter()
        .map(|ls| ls[crate::splat::min_scale_axis(ls)].exp())
        .sum();
    sum / scene.len() as f64
}

/// Adds `weight * d flatten / d log_scale` into the gradient buffer.
pub fn flatten_backward(scene: &GaussianScene, grads: &mut crate::render::SceneGrads, weight: f64) {
    if scene.is_empty() {
        return;
    }
    let inv_n = weight / scene.len() as f64;
    for (i, ls) in scene.log_scale.iter().enumerate() {
        let axis = crate::splat::min_scale_axis(ls);
        grads.log_scale[i][axis] += ls[axis].exp() * inv_n;
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossWeights {
    pub dn: f64,
    pub p: f64,
    pub rd: f64,
    pub rn: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            dn: 0.05,
            p: 0.5,
            rd: 0.05,
            rn: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ActiveTerms {
    pub dn: bool,
    pub p: bool,
    pub rd: bool,
    pub rn: bool,
}

impl ActiveTerms {
    pub fn all() -> Self {
        Self {
            dn: true,
            p: true,
            rd: true,
            rn: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_rgb: f64,
    pub l_s: f64,
    pub l_dn: f64,
    pub l_p: f64,
    pub l_rd: f64,
    pub l_rn: f64,
    pub total: f64,
    pub px_rgb: usize,
    pub px_dn: usize,
    pub px_p: usize,
    pub px_rd: usize,
    pub px_rn: usize,
}

/// Weighted total per the overall objective:
/// `total = l_rgb + l_s + dn*l_dn + p*l_p + rd*l_rd + rn*l_rn`.
pub fn total_loss(mut parts: LossBreakdown, weights: &LossWeights) -> LossBreakdown {
    parts.total = parts.l_rgb
        + parts.l_s
        + weights.dn * parts.l_dn
        + weights.p * parts.l_p
        + weights.rd * parts.l_rd
        + weights.rn * parts.l_rn;
    parts
}

/// Per-view data consumed by the loss stack.
pub struct ViewData {
    pub cam: CameraView,
    pub target_rgb: VectorMap,
    pub labels: PlaneLabelMap,
    /// Aligned prior depth.
    pub prior_depth: ScalarMap,
    /// Prior surface normals derived from the aligned prior depth.
    pub prior_normals: VectorMap,
    pub lt: BoolMap,
    pub conf: BoolMap,
}

pub struct LossEval {
    pub breakdown: LossBreakdown,
    pub channel_grads: ChannelGrads,
    pub plane_params: Vec<PlaneParams>,
    pub skipped_planes: Vec<u32>,
}

/// Evaluate all active loss terms on a render of `view`, producing the
/// upstream gradients for `render_backward`. When `fixed_planes` is given the
/// co-planarity term uses those parameters instead of refitting (used by
/// gradient checks; training refits every step).
pub fn evaluate(
    scene: &GaussianScene,
    out: &RenderOutput,
    view: &ViewData,
    weights: &LossWeights,
    active: &ActiveTerms,
    fixed_planes: Option<&[PlaneParams]>,
) -> LossEval {
    let (w, h) = (view.cam.width, view.cam.height);
    let mut grads = ChannelGrads::zeros(w, h);
    let mut breakdown = LossBreakdown::default();
    let mut g_depth = ScalarMap::filled(w, h, 0.0);
    let mut plane_params = Vec::new();
    let mut skipped_planes = Vec::new();

    // photometric
    let (l_rgb, g_rgb) = rgb_loss_with_grad(&out.color, &view.target_rgb);
    breakdown.l_rgb = l_rgb;
    breakdown.px_rgb = w * h;
    for v in 0..h {
        for u in 0..w {
            grads.color.set(u, v, g_rgb.get(u, v));
        }
    }

    // flattening (value only; the parameter gradient bypasses the renderer)
    breakdown.l_s = flatten_loss(scene);

    let needs_nd = active.dn || active.rn;
    let surf_normal = if needs_nd {
        crate::geometry::normal_from_depth(&out.depth, &view.cam, 1)
    } else {
        VectorMap::invalid(w, h)
    };
    let mut g_surf_normal = VectorMap::filled(w, h, Vector3::zeros());

    if active.dn {
        let gs_unit = normalized_map(&out.gs_normal);
        let (l_dn, n_dn) = dn_consistency_loss(&surf_normal, &gs_unit, &view.lt);
        breakdown.l_dn = l_dn;
        breakdown.px_dn = n_dn;
        let (g_s, g_u) = dn_consistency_backward(&surf_normal, &gs_unit, &view.lt, n_dn);
        for v in 0..h {
            for u in 0..w {
                let gs = g_s.get(u, v) * weights.dn;
                if gs != Vector3::zeros() {
                    g_surf_normal.set(u, v, g_surf_normal.get(u, v) + gs);
                }
                let gu = g_u.get(u, v) * weights.dn;
                if gu != Vector3::zeros() {
                    // through the per-pixel normalization to the raw blend
                    let raw = out.gs_normal.get(u, v);
                    let g_raw = normalize_backward(&raw, &gu);
                    grads.normal.set(u, v, grads.normal.get(u, v) + g_raw);
                }
            }
        }
    }

    if active.rn {
        let (l_rn, n_rn) = prior_normal_loss(&surf_normal, &view.prior_normals, &view.labels);
        breakdown.l_rn = l_rn;
        breakdown.px_rn = n_rn;
        let g = prior_normal_backward(&surf_normal, &view.prior_normals, &view.labels, n_rn);
        for v in 0..h {
            for u in 0..w {
                let gv = g.get(u, v) * weights.rn;
                if gv != Vector3::zeros() {
                    g_surf_normal.set(u, v, g_surf_normal.get(u, v) + gv);
                }
            }
        }
    }

    if needs_nd {
        normal_from_depth_backward(&out.depth, &view.cam, 1, &g_surf_normal, &mut g_depth);
    }

    if active.p {
        match fixed_planes {
            Some(params) => {
                let (l_p, n_p) =
                    coplanarity_with_params(&out.depth, &view.labels, &view.cam, params);
                breakdown.l_p = l_p;
                breakdown.px_p = n_p;
                let g = coplanarity_backward(&out.depth, &view.labels, &view.cam, params, n_p);
                add_scaled(&mut g_depth, &g, weights.p);
                plane_params = params.to_vec();
            }
            None => {
                let cop = coplanarity_loss(&out.depth, &view.labels, &view.cam);
                breakdown.l_p = cop.loss;
                breakdown.px_p = cop.pixel_count;
                let g = coplanarity_backward(
                    &out.depth,
                    &view.labels,
                    &view.cam,
                    &cop.params,
                    cop.pixel_count,
                );
                add_scaled(&mut g_depth, &g, weights.p);
                plane_params = cop.params;
                skipped_planes = cop.skipped;
            }
        }
    }

    if active.rd {
        let (l_rd, n_rd) = prior_depth_loss(&out.depth, &view.prior_depth, &view.lt, &view.conf);
        breakdown.l_rd = l_rd;
        breakdown.px_rd = n_rd;
        let g = prior_depth_backward(&out.depth, &view.prior_depth, &view.lt, &view.conf, n_rd);
        add_scaled(&mut g_depth, &g, weights.rd);
    }

    // depth gradients chain through the ray-plane division to the blended
    // plane-distance and normal channels
    depth_backward_to_channels(out, &view.cam, &g_depth, &mut grads);

    LossEval {
        breakdown: total_loss(breakdown, weights),
        channel_grads: grads,
        plane_params,
        skipped_planes,
    }
}

fn add_scaled(dst: &mut ScalarMap, src: &ScalarMap, k: f64) {
    for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
        *d += k * s;
    }
}

/// Per-pixel unit normals from a raw blended normal map; NaN when the blend
/// is too short to orient.
pub fn normalized_map(raw: &VectorMap) -> VectorMap {
    VectorMap::from_fn(raw.width(), raw.height(), |u, v| {
        let n = raw.get(u, v);
        let len = n.norm();
        if len > 1e-9 && n.iter().all(|x| x.is_finite()) {
            n / len
        } else {
            Vector3::repeat(f64::NAN)
        }
    })
}

/// d normalize(v) applied to an upstream gradient.
fn normalize_backward(v: &Vector3<f64>, g_unit: &Vector3<f64>) -> Vector3<f64> {
    let len = v.norm();
    if len <= 1e-9 {
        return Vector3::zeros();
    }
    let vn = v / len;
    (g_unit - vn * vn.dot(g_unit)) / len
}

/// Chain `d loss / d depth` through `D = delta / (N . ray)` into the
/// plane-distance and raw-normal channel gradients.
pub fn depth_backward_to_channels(
    out: &RenderOutput,
    cam: &CameraView,
    g_depth: &ScalarMap,
    grads: &mut ChannelGrads,
) {
    for v in 0..out.depth.height() {
        for u in 0..out.depth.width() {
            let g = g_depth.get(u, v);
            if g == 0.0 || !out.depth.is_valid(u, v) {
                continue;
            }
            if out.acc.get(u, v) < ACC_MIN {
                continue;
            }
            let ray = cam.ray_dir(u as f64, v as f64);
            let denom = out.gs_normal.get(u, v).dot(&ray);
            if denom.abs() < 1e-6 {
                continue;
            }
            grads
                .plane_dist
                .set(u, v, grads.plane_dist.get(u, v) + g / denom);
            let delta = out.plane_dist.get(u, v);
            let g_n = -ray * (delta / (denom * denom)) * g;
            grads.normal.set(u, v, grads.normal.get(u, v) + g_n);
        }
    }
}

/// Gradient of losses on a depth-derived normal map back to the depth map.
/// Mirrors the forward cross-neighbor construction exactly.
pub fn normal_from_depth_backward(
    depth: &ScalarMap,
    cam: &CameraView,
    h_off: usize,
    g_normal: &VectorMap,
    g_depth: &mut ScalarMap,
) {
    let (w, h) = (depth.width(), depth.height());
    if h_off == 0 || w <= 2 * h_off || h <= 2 * h_off {
        return;
    }
    let valid = |u: usize, v: usize| {
        let d = depth.get(u, v);
        d.is_finite() && d > 0.0
    };
    for v in h_off..h - h_off {
        for u in h_off..w - h_off {
            let g_n = g_normal.get(u, v);
            if g_n == Vector3::zeros() {
                continue;
            }
            if !(valid(u - h_off, v)
                && valid(u + h_off, v)
                && valid(u, v - h_off)
                && valid(u, v + h_off)
                && valid(u, v))
            {
                continue;
            }
            let r0 = cam.ray_dir((u - h_off) as f64, v as f64);
            let r1 = cam.ray_dir((u + h_off) as f64, v as f64);
            let r2 = cam.ray_dir(u as f64, (v - h_off) as f64);
            let r3 = cam.ray_dir(u as f64, (v + h_off) as f64);
            let p0 = depth.get(u - h_off, v) * r0;
            let p1 = depth.get(u + h_off, v) * r1;
            let p2 = depth.get(u, v - h_off) * r2;
            let p3 = depth.get(u, v + h_off) * r3;
            let a = p1 - p0;
            let b = p3 - p2;
            let cross = a.cross(&b);
            let norm = cross.norm();
            if norm < 1e-12 {
                continue;
            }
            let center = depth.get(u, v) * cam.ray_dir(u as f64, v as f64);
            let sign = if cross.dot(&center) > 0.0 { -1.0 } else { 1.0 };
            // n = sign * cross / |cross|
            let c_hat = cross / norm;
            let g_cross = (g_n - c_hat * c_hat.dot(&g_n)) * (sign / norm);
            let g_a = b.cross(&g_cross);
            let g_b = g_cross.cross(&a);
            let mut add = |uu: usize, vv: usize, val: f64| {
                g_depth.set(uu, vv, g_depth.get(uu, vv) + val);
            };
            add(u + h_off, v, r1.dot(&g_a));
            add(u - h_off, v, -r0.dot(&g_a));
            add(u, v + h_off, r3.dot(&g_b));
            add(u, v - h_off, -r2.dot(&g_b));
        }
    }
}
