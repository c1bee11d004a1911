//! Analytic gradients of the rendered channels with respect to every
//! Gaussian parameter. The backward walk re-traverses pixels in the exact
//! forward order (same sort, same alpha test, same early stop) and uses the
//! forward totals to form suffix sums, so gradients are exact for the
//! rendered function.

use super::{prepare, splat_alpha, RenderOutput, ALPHA_CLIP, EARLY_STOP_T, TILE};
use crate::geometry::CameraView;
use crate::raster::{ScalarMap, VectorMap};
use crate::splat::{self, GaussianScene};
use nalgebra::{Matrix2, Matrix3, Vector2, Vector3, Vector4};

/// Upstream gradients on the blended output channels.
#[derive(Debug, Clone)]
pub struct ChannelGrads {
    pub color: VectorMap,
    pub normal: VectorMap,
    pub plane_dist: ScalarMap,
    pub acc: ScalarMap,
}

impl ChannelGrads {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            color: VectorMap::filled(width, height, Vector3::zeros()),
            normal: VectorMap::filled(width, height, Vector3::zeros()),
            plane_dist: ScalarMap::filled(width, height, 0.0),
            acc: ScalarMap::filled(width, height, 0.0),
        }
    }
}

/// Per-parameter gradients, aligned with the scene's storage.
#[derive(Debug, Clone)]
pub struct SceneGrads {
    pub mu: Vec<Vector3<f64>>,
    pub log_scale: Vec<Vector3<f64>>,
    pub rot: Vec<Vector4<f64>>,
    pub opacity_logit: Vec<f64>,
    pub rgb: Vec<Vector3<f64>>,
}

impl SceneGrads {
    pub fn zeros(n: usize) -> Self {
        Self {
            mu: vec![Vector3::zeros(); n],
            log_scale: vec![Vector3::zeros(); n],
            rot: vec![Vector4::zeros(); n],
            opacity_logit: vec![0.0; n],
            rgb: vec![Vector3::zeros(); n],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.mu.iter().all(|v| v.iter().all(|x| x.is_finite()))
            && self.log_scale.iter().all(|v| v.iter().all(|x| x.is_finite()))
            && self.rot.iter().all(|v| v.iter().all(|x| x.is_finite()))
            && self.opacity_logit.iter().all(|x| x.is_finite())
            && self.rgb.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

pub fn render_backward(
    scene: &GaussianScene,
    cam: &CameraView,
    forward: &RenderOutput,
    grads: &ChannelGrads,
) -> SceneGrads {
    let (w, h) = (cam.width, cam.height);
    let prep = prepare(scene, cam);
    let n_splats = prep.splats.len();

    // per-splat accumulators in image space
    let mut g_rgb = vec![Vector3::zeros(); n_splats];
    let mut g_ncam = vec![Vector3::zeros(); n_splats];
    let mut g_d = vec![0.0f64; n_splats];
    let mut g_op = vec![0.0f64; n_splats];
    let mut g_mu2d = vec![Vector2::zeros(); n_splats];
    let mut g_conic = vec![Matrix2::zeros(); n_splats];

    let tile = TILE;
    for ty in 0..prep.tiles_y {
        for tx in 0..prep.tiles_x {
            let list = &prep.tile_lists[ty * prep.tiles_x + tx];
            if list.is_empty() {
                continue;
            }
            let v_end = ((ty + 1) * tile).min(h);
            let u_end = ((tx + 1) * tile).min(w);
            for v in ty * tile..v_end {
                for u in tx * tile..u_end {
                    let gc = grads.color.get(u, v);
                    let gn = grads.normal.get(u, v);
                    let gd = grads.plane_dist.get(u, v);
                    let ga = grads.acc.get(u, v);
                    if gc == Vector3::zeros() && gn == Vector3::zeros() && gd == 0.0 && ga == 0.0 {
                        continue;
                    }
                    let out_c = forward.color.get(u, v);
                    let out_n = forward.gs_normal.get(u, v);
                    let out_d = forward.plane_dist.get(u, v);
                    let out_a = forward.acc.get(u, v);

                    let (px, py) = (u as f64, v as f64);
                    let mut t = 1.0;
                    let mut pre_c = Vector3::zeros();
                    let mut pre_n = Vector3::zeros();
                    let mut pre_d = 0.0;
                    let mut pre_a = 0.0;
                    for &si in list {
                        let s = &prep.splats[si as usize];
                        if u < s.u0 || u > s.u1 || v < s.v0 || v > s.v1 {
                            continue;
                        }
                        let Some((alpha, gw)) = splat_alpha(s, px, py) else {
                            continue;
                        };
                        let wgt = t * alpha;
                        pre_c += s.rgb * wgt;
                        pre_n += s.n_cam * wgt;
                        pre_d += s.d_plane * wgt;
                        pre_a += wgt;

                        let i = si as usize;
                        g_rgb[i] += gc * wgt;
                        g_ncam[i] += gn * wgt;
                        g_d[i] += gd * wgt;

                        let inv_om = 1.0 / (1.0 - alpha);
                        let mut da = 0.0;
                        da += gc.dot(&(s.rgb * t - (out_c - pre_c) * inv_om));
                        da += gn.dot(&(s.n_cam * t - (out_n - pre_n) * inv_om));
                        da += gd * (s.d_plane * t - (out_d - pre_d) * inv_om);
                        da += ga * (t - (out_a - pre_a) * inv_om);

                        // alpha = min(op * G, clip): the clipped branch is flat
                        if s.opacity * gw < ALPHA_CLIP {
                            g_op[i] += da * gw;
                            let dpower = da * s.opacity * gw; // dG/dpower = G
                            let dx = px - s.mu2d.0;
                            let dy = py - s.mu2d.1;
                            let (a, b, c) = s.conic;
                            // power = -(a dx^2 + 2 b dx dy + c dy^2) / 2
                            g_conic[i] += dpower
                                * Matrix2::new(
                                    -0.5 * dx * dx,
                                    -0.5 * dx * dy,
                                    -0.5 * dx * dy,
                                    -0.5 * dy * dy,
                                );
                            // dpower/dmu2d = conic . delta
                            g_mu2d[i] +=
                                dpower * Vector2::new(a * dx + b * dy, b * dx + c * dy);
                        }

                        t *= 1.0 - alpha;
                        if t < EARLY_STOP_T {
                            break;
                        }
                    }
                }
            }
        }
    }

    // image-space gradients back to Gaussian parameters
    let mut out = SceneGrads::zeros(scene.len());
    for (si, s) in prep.splats.iter().enumerate() {
        let id = s.id;
        let g = scene.get(id);
        let p_cam = cam.world_to_cam(&g.mu);
        let (fx, fy) = (cam.fx(), cam.fy());
        let j = splat::jacobian(fx, fy, &p_cam);
        let m = j * cam.r();

        // opacity chain: d op / d logit = op (1 - op)
        let op = s.opacity;
        out.opacity_logit[id] += g_op[si] * op * (1.0 - op);
        out.rgb[id] += g_rgb[si];

        // conic -> 2D covariance: C = cov2d^{-1}
        let (ca, cb, cc) = s.conic;
        let conic = Matrix2::new(ca, cb, cb, cc);
        let g_cov2d = -conic * g_conic[si] * conic;

        // cov2d = M cov3 M^T (+ eps I)
        let rq = splat::rotation_from_quat(&g.rot);
        let scales = g.scales();
        let v_mat = Matrix3::from_columns(&[
            rq.column(0) * scales[0],
            rq.column(1) * scales[1],
            rq.column(2) * scales[2],
        ]);
        let cov3 = v_mat * v_mat.transpose();
        let g_cov2d_sym = 0.5 * (g_cov2d + g_cov2d.transpose());
        let g_cov3 = m.transpose() * g_cov2d_sym * m;
        let g_m = 2.0 * g_cov2d_sym * m * cov3;
        let g_j = g_m * cam.r().transpose();

        // center gradient through the exact projection and through J
        let mut gp_cam = j.transpose() * g_mu2d[si];
        let (x, y, z) = (p_cam.x, p_cam.y, p_cam.z);
        let z2 = z * z;
        let z3 = z2 * z;
        gp_cam.x += g_j[(0, 2)] * (-fx / z2);
        gp_cam.y += g_j[(1, 2)] * (-fy / z2);
        gp_cam.z += g_j[(0, 0)] * (-fx / z2)
            + g_j[(1, 1)] * (-fy / z2)
            + g_j[(0, 2)] * (2.0 * fx * x / z3)
            + g_j[(1, 2)] * (2.0 * fy * y / z3);

        // plane distance d = p_cam . n_cam
        gp_cam += g_d[si] * s.n_cam;
        let g_ncam_total = g_ncam[si] + g_d[si] * p_cam;

        // n_cam = sign * R_cam * n_world, n_world = R_q[:, axis]
        let sign = if s.flipped { -1.0 } else { 1.0 };
        let g_nworld = sign * (cam.r().transpose() * g_ncam_total);

        // cov3 = V V^T, V = R_q S
        let g_cov3_sym = 0.5 * (g_cov3 + g_cov3.transpose());
        let g_v = 2.0 * g_cov3_sym * v_mat;
        let mut g_rq = Matrix3::zeros();
        for col in 0..3 {
            for row in 0..3 {
                g_rq[(row, col)] += g_v[(row, col)] * scales[col];
            }
            let ds: f64 = g_v.column(col).dot(&rq.column(col));
            out.log_scale[id][col] += ds * scales[col];
        }
        let axis = splat::min_scale_axis(&g.log_scale);
        for row in 0..3 {
            g_rq[(row, axis)] += g_nworld[row];
        }
        out.rot[id] += quat_backward(&g.rot, &g_rq);
        out.mu[id] += cam.r().transpose() * gp_cam;
    }
    out
}

/// Gradient of a loss through `rotation_from_quat` back to the raw (not
/// necessarily unit) quaternion, including the normalization Jacobian.
pub fn quat_backward(q_raw: &Vector4<f64>, g_r: &Matrix3<f64>) -> Vector4<f64> {
    let n = q_raw.norm();
    let q = q_raw / n;
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);

    let dr_dw = Matrix3::new(0.0, -2.0 * z, 2.0 * y, 2.0 * z, 0.0, -2.0 * x, -2.0 * y, 2.0 * x, 0.0);
    let dr_dx = Matrix3::new(
        0.0,
        2.0 * y,
        2.0 * z,
        2.0 * y,
        -4.0 * x,
        -2.0 * w,
        2.0 * z,
        2.0 * w,
        -4.0 * x,
    );
    let dr_dy = Matrix3::new(
        -4.0 * y,
        2.0 * x,
        2.0 * w,
        2.0 * x,
        0.0,
        2.0 * z,
        -2.0 * w,
        2.0 * z,
        -4.0 * y,
    );
    let dr_dz = Matrix3::new(
        -4.0 * z,
        -2.0 * w,
        2.0 * x,
        2.0 * w,
        -4.0 * z,
        2.0 * y,
        2.0 * x,
        2.0 * y,
        0.0,
    );
    let g_unit = Vector4::new(
        g_r.component_mul(&dr_dw).sum(),
        g_r.component_mul(&dr_dx).sum(),
        g_r.component_mul(&dr_dy).sum(),
        g_r.component_mul(&dr_dz).sum(),
    );
    (g_unit - q * q.dot(&g_unit)) / n
}
