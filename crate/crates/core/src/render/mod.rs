//! Software splatter: depth-sorted front-to-back alpha blending of projected
//! Gaussians into color, GS-normal, plane-distance, accumulation and depth
//! rasters for one view. Normals and plane distances blend with the same
//! `T_i alpha_i` weights as color; depth comes from the per-pixel ray-plane
//! intersection of the blended normal and plane-distance channels.

pub mod backward;

pub use backward::{render_backward, ChannelGrads, SceneGrads};

use crate::geometry::CameraView;
use crate::raster::{ScalarMap, VectorMap};
use crate::splat::{self, GaussianScene};
use nalgebra::{Matrix2, Vector3};

/// Alpha ceiling per splat (3DGS convention).
pub const ALPHA_CLIP: f64 = 0.99;
/// Contributions below this alpha are skipped.
pub const ALPHA_SKIP: f64 = 1.0 / 255.0;
/// Front-to-back compositing stops below this transmittance.
pub const EARLY_STOP_T: f64 = 1e-4;
/// Minimum accumulated weight for a pixel's depth to count.
pub const ACC_MIN: f64 = 0.5;
/// Splat footprint radius in units of the largest 2D standard deviation.
/// exp(-3.5^2 / 2) is already below ALPHA_SKIP, so the bounding box never
/// cuts off a contribution the alpha test would keep.
const RADIUS_SIGMA: f64 = 3.5;
/// ln(ALPHA_SKIP): quadratic-form values below this cannot pass the alpha
/// test for any opacity <= 1.
const POWER_SKIP: f64 = -5.5413;

pub(crate) const TILE: usize = 16;

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub color: VectorMap,
    pub gs_normal: VectorMap,
    pub plane_dist: ScalarMap,
    pub depth: ScalarMap,
    pub acc: ScalarMap,
}

/// Per-splat data shared by the forward and backward walks.
pub(crate) struct Splat {
    pub id: usize,
    pub mu2d: (f64, f64),
    /// Inverse 2D covariance (a, b, c) for [[a, b], [b, c]].
    pub conic: (f64, f64, f64),
    pub opacity: f64,
    pub rgb: Vector3<f64>,
    /// Camera-frame normal, oriented toward the camera.
    pub n_cam: Vector3<f64>,
    /// Plane distance of the splat's tangent plane to the camera center.
    pub d_plane: f64,
    /// Inclusive pixel bounds.
    pub u0: usize,
    pub u1: usize,
    pub v0: usize,
    pub v1: usize,
    /// True when the camera-facing flip negated the world normal.
    pub flipped: bool,
}

pub(crate) struct Prepared {
    pub splats: Vec<Splat>,
    /// Per tile: indices into `splats`, in global depth order.
    pub tile_lists: Vec<Vec<u32>>,
    pub tiles_x: usize,
    pub tiles_y: usize,
}

pub(crate) fn prepare(scene: &GaussianScene, cam: &CameraView) -> Prepared {
    let (w, h) = (cam.width, cam.height);
    let mut projected: Vec<(usize, f64)> = Vec::new();
    let mut splats = Vec::new();
    for i in 0..scene.len() {
        let g = scene.get(i);
        let Some(p) = splat::project_with_id(&g, cam, i) else {
            continue;
        };
        let cov = p.cov2d;
        // largest eigenvalue of the 2x2 covariance bounds the footprint
        let mid = 0.5 * (cov[(0, 0)] + cov[(1, 1)]);
        let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(0, 1)];
        if det <= 0.0 {
            continue;
        }
        let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
        let radius = RADIUS_SIGMA * lambda_max.sqrt();
        let u0 = (p.mu2d.0 - radius).floor().max(0.0);
        let u1 = (p.mu2d.0 + radius).ceil().min((w - 1) as f64);
        let v0 = (p.mu2d.1 - radius).floor().max(0.0);
        let v1 = (p.mu2d.1 + radius).ceil().min((h - 1) as f64);
        if u0 > u1 || v0 > v1 {
            continue;
        }
        let inv = invert_2x2(&cov);
        let p_cam = cam.world_to_cam(&g.mu);
        let n_world = splat::gaussian_normal(&g);
        let mut n_cam = cam.r() * n_world;
        let mut flipped = false;
        if n_cam.dot(&p_cam) > 0.0 {
            n_cam = -n_cam;
            flipped = true;
        }
        let d_plane = p_cam.dot(&n_cam);
        projected.push((splats.len(), p.depth_center));
        splats.push(Splat {
            id: i,
            mu2d: p.mu2d,
            conic: inv,
            opacity: g.opacity(),
            rgb: g.rgb,
            n_cam,
            d_plane,
            u0: u0 as usize,
            u1: u1 as usize,
            v0: v0 as usize,
            v1: v1 as usize,
            flipped,
        });
    }
    // global depth sort, ties by gaussian id for determinism
    projected.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then_with(|| splats[a.0].id.cmp(&splats[b.0].id))
    });

    let tiles_x = w.div_ceil(TILE);
    let tiles_y = h.div_ceil(TILE);
    let mut tile_lists: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for &(si, _) in &projected {
        let s = &splats[si];
        let tx0 = s.u0 / TILE;
        let tx1 = s.u1 / TILE;
        let ty0 = s.v0 / TILE;
        let ty1 = s.v1 / TILE;
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                tile_lists[ty * tiles_x + tx].push(si as u32);
            }
        }
    }
    Prepared {
        splats,
        tile_lists,
        tiles_x,
        tiles_y,
    }
}

fn invert_2x2(m: &Matrix2<f64>) -> (f64, f64, f64) {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    (m[(1, 1)] / det, -m[(0, 1)] / det, m[(0, 0)] / det)
}

/// Gaussian weight of a splat at pixel offset (dx, dy); `None` when the
/// contribution cannot pass the alpha test.
#[inline]
pub(crate) fn splat_alpha(s: &Splat, px: f64, py: f64) -> Option<(f64, f64)> {
    let dx = px - s.mu2d.0;
    let dy = py - s.mu2d.1;
    let (a, b, c) = s.conic;
    let power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy);
    if power < POWER_SKIP {
        return None;
    }
    let g = power.exp();
    let alpha = (s.opacity * g).min(ALPHA_CLIP);
    if alpha < ALPHA_SKIP {
        return None;
    }
    Some((alpha, g))
}

/// Forward render of the scene into one camera.
pub fn render(scene: &GaussianScene, cam: &CameraView) -> RenderOutput {
    let (w, h) = (cam.width, cam.height);
    let prep = prepare(scene, cam);
    let mut color = VectorMap::filled(w, h, Vector3::zeros());
    let mut normal = VectorMap::filled(w, h, Vector3::zeros());
    let mut dist = ScalarMap::filled(w, h, 0.0);
    let mut acc = ScalarMap::filled(w, h, 0.0);

    for ty in 0..prep.tiles_y {
        for tx in 0..prep.tiles_x {
            let list = &prep.tile_lists[ty * prep.tiles_x + tx];
            if list.is_empty() {
                continue;
            }
            let v_end = ((ty + 1) * TILE).min(h);
            let u_end = ((tx + 1) * TILE).min(w);
            for v in ty * TILE..v_end {
                for u in tx * TILE..u_end {
                    let (px, py) = (u as f64, v as f64);
                    let mut t = 1.0;
                    let mut c_acc = Vector3::zeros();
                    let mut n_acc = Vector3::zeros();
                    let mut d_acc = 0.0;
                    let mut a_acc = 0.0;
                    for &si in list {
                        let s = &prep.splats[si as usize];
                        if u < s.u0 || u > s.u1 || v < s.v0 || v > s.v1 {
                            continue;
                        }
                        let Some((alpha, _)) = splat_alpha(s, px, py) else {
                            continue;
                        };
                        let wgt = t * alpha;
                        c_acc += s.rgb * wgt;
                        n_acc += s.n_cam * wgt;
                        d_acc += s.d_plane * wgt;
                        a_acc += wgt;
                        t *= 1.0 - alpha;
                        if t < EARLY_STOP_T {
                            break;
                        }
                    }
                    color.set(u, v, c_acc);
                    normal.set(u, v, n_acc);
                    dist.set(u, v, d_acc);
                    acc.set(u, v, a_acc);
                }
            }
        }
    }

    let mut out = RenderOutput {
        color,
        gs_normal: normal,
        plane_dist: dist,
        depth: ScalarMap::invalid(w, h),
        acc,
    };
    out.depth = depth_from_plane(&out, cam);
    out
}

/// Ray-plane depth: `D(p) = delta(p) / (N(p) . K^{-1} p~)` using the raw
/// blended channels. NaN where coverage is below `ACC_MIN` or the
/// denominator is nearly singular.
pub fn depth_from_plane(render: &RenderOutput, cam: &CameraView) -> ScalarMap {
    ScalarMap::from_fn(render.acc.width(), render.acc.height(), |u, v| {
        if render.acc.get(u, v) < ACC_MIN {
            return f64::NAN;
        }
        let ray = cam.ray_dir(u as f64, v as f64);
        let denom = render.gs_normal.get(u, v).dot(&ray);
        if denom.abs() < 1e-6 {
            return f64::NAN;
        }
        render.plane_dist.get(u, v) / denom
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::simple_camera;
    use crate::splat::{logit, Gaussian};
    use approx::assert_relative_eq;
    use nalgebra::Vector4;

    fn fronto_plane_gaussian(z: f64, extent: f64) -> Gaussian {
        Gaussian {
            mu: Vector3::new(0.0, 0.0, z),
            // flat in z, wide in x/y
            log_scale: Vector3::new(extent.ln(), extent.ln(), 1e-4f64.ln()),
            rot: Vector4::new(1.0, 0.0, 0.0, 0.0),
            opacity_logit: logit(0.999),
            rgb: Vector3::new(0.9, 0.4, 0.1),
        }
    }

    #[test]
    fn single_flattened_gaussian_covers_frame() {
        let cam = simple_camera(40.0, 40.0, 16.0, 16.0, 33, 33);
        let mut scene = GaussianScene::new();
        scene.push(fronto_plane_gaussian(2.0, 40.0));
        let out = render(&scene, &cam);
        let c = out.color.get(16, 16);
        let a = out.acc.get(16, 16);
        // alpha clips at 0.99, so a single splat saturates there
        assert!(a >= 0.99 - 1e-12, "acc {a}");
        assert!((c / a - Vector3::new(0.9, 0.4, 0.1)).norm() < 1e-9);
        // camera-frame normal points toward the camera
        let n = out.gs_normal.get(16, 16) / a;
        assert!((n - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
        // plane distance is -z under the toward-camera sign convention
        assert_relative_eq!(out.plane_dist.get(16, 16) / a, -2.0, epsilon = 1e-9);
        // acc stays within [0, 1]
        for v in 0..33 {
            for u in 0..33 {
                assert!(out.acc.get(u, v) <= 1.0 + 1e-6);
            }
        }
    }

    /// Two identical co-located splats with alpha 0.5 blend to 0.75.
    #[test]
    fn compositing_series_hand_evaluated() {
        let cam = simple_camera(40.0, 40.0, 16.0, 16.0, 33, 33);
        let mut g = fronto_plane_gaussian(2.0, 40.0);
        g.opacity_logit = logit(0.5);
        let mut scene = GaussianScene::new();
        scene.push(g);
        scene.push(g);
        let out = render(&scene, &cam);
        // at the center the Gaussian weight is exactly 1, so alpha = 0.5
        assert_relative_eq!(out.acc.get(16, 16), 0.75, epsilon = 1e-9);
        let c = out.color.get(16, 16);
        assert_relative_eq!(c.x, 0.75 * 0.9, epsilon = 1e-9);
    }

    #[test]
    fn empty_coverage_pixel() {
        let cam = simple_camera(40.0, 40.0, 16.0, 16.0, 33, 33);
        let mut g = fronto_plane_gaussian(2.0, 0.01);
        g.mu = Vector3::new(0.0, 0.0, 1.0);
        let mut scene = GaussianScene::new();
        scene.push(g);
        let out = render(&scene, &cam);
        assert_eq!(out.acc.get(0, 0), 0.0);
        assert!(out.depth.get(0, 0).is_nan());
    }

    #[test]
    fn depth_from_plane_fronto() {
        let cam = simple_camera(100.0, 100.0, 50.0, 50.0, 101, 101);
        let mut scene = GaussianScene::new();
        scene.push(fronto_plane_gaussian(2.0, 40.0));
        let out = render(&scene, &cam);
        // principal pixel
        assert_relative_eq!(out.depth.get(50, 50), 2.0, epsilon = 1e-9);
        // off-center pixel: z-depth of a fronto plane is constant
        assert!(out.acc.get(80, 50) > 0.5);
        assert_relative_eq!(out.depth.get(80, 50), 2.0, epsilon = 1e-9);
    }

    /// A single flattened Gaussian forms a plane; rendered depth equals the
    /// analytic ray-plane intersection at every covered pixel.
    #[test]
    fn depth_matches_analytic_ray_plane() {
        let cam = simple_camera(60.0, 60.0, 32.0, 32.0, 65, 65);
        let tilt: f64 = 0.4;
        let (s, c) = tilt.sin_cos();
        // plane normal tilted about x
        let rot = nalgebra::Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c);
        let q = crate::splat::quat_from_rotation(&rot);
        let g = Gaussian {
            mu: Vector3::new(0.1, -0.2, 2.5),
            log_scale: Vector3::new(30.0f64.ln(), 30.0f64.ln(), 1e-5f64.ln()),
            rot: q,
            opacity_logit: logit(0.99),
            rgb: Vector3::new(0.5, 0.5, 0.5),
        };
        let mut scene = GaussianScene::new();
        scene.push(g);
        let out = render(&scene, &cam);
        let n_world: Vector3<f64> = rot.column(2).into();
        let mut n = n_world; // camera at identity: world == camera frame
        if n.dot(&g.mu) > 0.0 {
            n = -n;
        }
        let delta = g.mu.dot(&n);
        let mut checked = 0;
        for v in 0..65 {
            for u in 0..65 {
                if out.acc.get(u, v) < ACC_MIN {
                    continue;
                }
                let ray = cam.ray_dir(u as f64, v as f64);
                let analytic = delta / n.dot(&ray);
                assert!(
                    (out.depth.get(u, v) - analytic).abs() < 1e-5,
                    "pixel ({u},{v}): {} vs {analytic}",
                    out.depth.get(u, v)
                );
                checked += 1;
            }
        }
        assert!(checked > 1000, "only {checked} covered pixels");
    }

    #[test]
    fn grazing_normal_gives_nan() {
        let cam = simple_camera(40.0, 40.0, 16.0, 16.0, 33, 33);
        let out = RenderOutput {
            color: VectorMap::filled(33, 33, Vector3::zeros()),
            gs_normal: VectorMap::filled(33, 33, Vector3::new(1.0, 0.0, 0.0)),
            plane_dist: ScalarMap::filled(33, 33, -2.0),
            depth: ScalarMap::invalid(33, 33),
            acc: ScalarMap::filled(33, 33, 1.0),
        };
        let depth = depth_from_plane(&out, &cam);
        // at the principal pixel the ray is (0,0,1), orthogonal to n
        assert!(depth.get(16, 16).is_nan());
        assert!(depth.is_valid(30, 16));
    }

    #[test]
    fn rendering_is_deterministic() {
        let cam = simple_camera(50.0, 50.0, 24.0, 24.0, 49, 49);
        let mut scene = GaussianScene::new();
        for i in 0..50 {
            let t = i as f64;
            scene.push(Gaussian {
                mu: Vector3::new((t * 0.37).sin(), (t * 0.53).cos() * 0.5, 1.5 + (t * 0.11).sin()),
                log_scale: Vector3::new(-2.0, -2.3, -4.0),
                rot: Vector4::new(1.0, 0.1 * t.sin(), 0.05, 0.0),
                opacity_logit: logit(0.3 + 0.4 * ((t * 0.7).sin() * 0.5 + 0.5)),
                rgb: Vector3::new(0.2, 0.5, 0.8),
            });
        }
        let a = render(&scene, &cam);
        let b = render(&scene, &cam);
        assert_eq!(a.color, b.color);
        assert_eq!(a.acc, b.acc);
        // bit-level comparison (NaN-aware) for the depth channel
        for (x, y) in a.depth.data().iter().zip(b.depth.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    /// Sum of T_i alpha_i is monotone non-decreasing in any single alpha.
    #[test]
    fn acc_monotone_in_opacity() {
        let cam = simple_camera(50.0, 50.0, 24.0, 24.0, 49, 49);
        let build = |op_mid: f64| {
            let mut scene = GaussianScene::new();
            for (k, z) in [1.0, 1.5, 2.0].iter().enumerate() {
                let mut g = fronto_plane_gaussian(*z, 5.0);
                g.opacity_logit = logit(if k == 1 { op_mid } else { 0.4 });
                scene.push(g);
            }
            render(&scene, &cam).acc.get(24, 24)
        };
        let lo = build(0.2);
        let hi = build(0.6);
        assert!(hi >= lo - 1e-12, "{hi} < {lo}");
    }
}
