//! Pinhole camera math: back-projection, cross-view point transfer, and
//! normal / plane-distance maps derived from depth.
//!
//! Conventions used throughout the crate:
//! - world-to-camera pose: `x_cam = R x_world + t`
//! - depth is z-depth (camera-frame z), not ray length
//! - a pixel (u, v) samples the ray `K^{-1} [u, v, 1]^T`
//! - normals are oriented toward the camera (`n . view_ray < 0`)

use crate::error::{Error, Result};
use crate::raster::{ScalarMap, VectorMap};
use nalgebra::{Matrix3, Vector3};

const ROT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CameraView {
    pub id: u32,
    k: Matrix3<f64>,
    k_inv: Matrix3<f64>,
    r: Matrix3<f64>,
    t: Vector3<f64>,
    pub width: usize,
    pub height: usize,
}

impl CameraView {
    pub fn new(
        id: u32,
        k: Matrix3<f64>,
        r: Matrix3<f64>,
        t: Vector3<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let rtr = r.transpose() * r;
        let ortho_err = (rtr - Matrix3::identity()).abs().max();
        if ortho_err > ROT_TOL {
            return Err(Error::InvalidCamera(format!(
                "rotation not orthonormal (max deviation {ortho_err:.3e})"
            )));
        }
        let det = r.determinant();
        if (det - 1.0).abs() > ROT_TOL {
            return Err(Error::InvalidCamera(format!(
                "rotation determinant {det} != +1"
            )));
        }
        let (fx, fy, cx, cy) = (k[(0, 0)], k[(1, 1)], k[(0, 2)], k[(1, 2)]);
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if cx < 0.0 || cx >= width as f64 || cy < 0.0 || cy >= height as f64 {
            return Err(Error::InvalidCamera(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        let k_inv = k
            .try_inverse()
            .ok_or_else(|| Error::InvalidCamera("singular intrinsics".into()))?;
        Ok(Self {
            id,
            k,
            k_inv,
            r,
            t,
            width,
            height,
        })
    }

    pub fn k(&self) -> &Matrix3<f64> {
        &self.k
    }

    pub fn k_inv(&self) -> &Matrix3<f64> {
        &self.k_inv
    }

    pub fn r(&self) -> &Matrix3<f64> {
        &self.r
    }

    pub fn t(&self) -> &Vector3<f64> {
        &self.t
    }

    pub fn fx(&self) -> f64 {
        self.k[(0, 0)]
    }

    pub fn fy(&self) -> f64 {
        self.k[(1, 1)]
    }

    pub fn cx(&self) -> f64 {
        self.k[(0, 2)]
    }

    pub fn cy(&self) -> f64 {
        self.k[(1, 2)]
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -self.r.transpose() * self.t
    }

    /// Unnormalized viewing ray `K^{-1} [u, v, 1]` in the camera frame.
    #[inline]
    pub fn ray_dir(&self, u: f64, v: f64) -> Vector3<f64> {
        self.k_inv * Vector3::new(u, v, 1.0)
    }

    #[inline]
    pub fn world_to_cam(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.r * p + self.t
    }

    #[inline]
    pub fn cam_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.r.transpose() * (p - self.t)
    }

    /// Pinhole projection of a camera-frame point; valid only for z > 0.
    #[inline]
    pub fn project_cam(&self, p: &Vector3<f64>) -> (f64, f64) {
        (
            self.fx() * p.x / p.z + self.cx(),
            self.fy() * p.y / p.z + self.cy(),
        )
    }

    #[inline]
    pub fn contains_pixel(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.width - 1) as f64 && v <= (self.height - 1) as f64
    }
}

/// Back-project a depth sample to a camera-frame 3D point: `D(p) K^{-1} [u, v, 1]`.
pub fn back_project(depth: &ScalarMap, cam: &CameraView, pixel: (usize, usize)) -> Result<Vector3<f64>> {
    let (u, v) = pixel;
    if !depth.in_bounds(u, v) {
        return Err(Error::OutOfBounds {
            u,
            v,
            width: depth.width(),
            height: depth.height(),
        });
    }
    let d = depth.get(u, v);
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::InvalidSample { u, v });
    }
    Ok(back_project_value(d, cam, u as f64, v as f64))
}

/// Back-projection with an explicit depth value (no map lookup).
#[inline]
pub fn back_project_value(depth: f64, cam: &CameraView, u: f64, v: f64) -> Vector3<f64> {
    depth * cam.ray_dir(u, v)
}

/// Result of moving a source-camera-frame point into a target camera.
#[derive(Debug, Clone, Copy)]
pub struct TransferredPoint {
    /// Point in the target camera frame.
    pub point: Vector3<f64>,
    /// Projected pixel in the target image (only meaningful when not behind).
    pub pixel: (f64, f64),
    /// Target-frame z.
    pub z: f64,
    /// True when the point is at or behind the target camera plane.
    pub behind: bool,
}

/// Rigid transfer of a source-camera-frame point into the target camera,
/// with reprojection: `P_t = R_t R_s^T P_s + (t_t - R_t R_s^T t_s)`.
pub fn transform_point(
    p_source: &Vector3<f64>,
    source: &CameraView,
    target: &CameraView,
) -> TransferredPoint {
    let r_rel = target.r * source.r.transpose();
    let p_t = r_rel * p_source + (target.t - r_rel * source.t);
    let behind = p_t.z <= 0.0;
    let pixel = if behind {
        (f64::NAN, f64::NAN)
    } else {
        target.project_cam(&p_t)
    };
    TransferredPoint {
        point: p_t,
        pixel,
        z: p_t.z,
        behind,
    }
}

/// Per-pixel surface normal from a depth map via the local-plane assumption:
/// back-project the four cross neighbors at offset `h` and take the
/// normalized cross product `(P1 - P0) x (P3 - P2)` with P0..P3 ordered
/// left, right, top, bottom. Oriented toward the camera. Degenerate or
/// incomplete neighborhoods yield NaN.
pub fn normal_from_depth(depth: &ScalarMap, cam: &CameraView, h: usize) -> VectorMap {
    let (w, hh) = (depth.width(), depth.height());
    let mut out = VectorMap::invalid(w, hh);
    if h == 0 || w <= 2 * h || hh <= 2 * h {
        return out;
    }
    for v in h..hh - h {
        for u in h..w - h {
            if let Some(n) = normal_at(depth, cam, u, v, h) {
                out.set(u, v, n);
            }
        }
    }
    out
}

#[inline]
fn valid_point(depth: &ScalarMap, cam: &CameraView, u: usize, v: usize) -> Option<Vector3<f64>> {
    let d = depth.get(u, v);
    if d.is_finite() && d > 0.0 {
        Some(back_project_value(d, cam, u as f64, v as f64))
    } else {
        None
    }
}

fn normal_at(
    depth: &ScalarMap,
    cam: &CameraView,
    u: usize,
    v: usize,
    h: usize,
) -> Option<Vector3<f64>> {
    let p0 = valid_point(depth, cam, u - h, v)?;
    let p1 = valid_point(depth, cam, u + h, v)?;
    let p2 = valid_point(depth, cam, u, v - h)?;
    let p3 = valid_point(depth, cam, u, v + h)?;
    let center = valid_point(depth, cam, u, v)?;
    let cross = (p1 - p0).cross(&(p3 - p2));
    let norm = cross.norm();
    if norm < 1e-12 {
        return None;
    }
    let mut n = cross / norm;
    if n.dot(&center) > 0.0 {
        n = -n;
    }
    Some(n)
}

/// Plane-distance map: per pixel, `delta(p) = P(p) . N(p)` where P is the
/// back-projected point. NaN wherever either input is invalid.
pub fn plane_distance_map(depth: &ScalarMap, normals: &VectorMap, cam: &CameraView) -> ScalarMap {
    assert_eq!(depth.width(), normals.width());
    assert_eq!(depth.height(), normals.height());
    ScalarMap::from_fn(depth.width(), depth.height(), |u, v| {
        if !normals.is_valid(u, v) {
            return f64::NAN;
        }
        match valid_point(depth, cam, u, v) {
            Some(p) => p.dot(&normals.get(u, v)),
            None => f64::NAN,
        }
    })
}

/// Simple intrinsics-only camera at the world origin, looking down +z.
pub fn simple_camera(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> CameraView {
    let k = Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0);
    CameraView::new(0, k, Matrix3::identity(), Vector3::zeros(), width, height).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rot_z(angle: f64) -> Matrix3<f64> {
        let (s, c) = angle.sin_cos();
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    }

    #[test]
    fn camera_rejects_bad_rotation() {
        let k = Matrix3::new(100.0, 0.0, 50.0, 0.0, 100.0, 50.0, 0.0, 0.0, 1.0);
        let mut r = Matrix3::identity();
        r[(0, 0)] = 1.1;
        assert!(CameraView::new(0, k, r, Vector3::zeros(), 100, 100).is_err());
        // reflection has det = -1
        let mut refl = Matrix3::identity();
        refl[(2, 2)] = -1.0;
        assert!(CameraView::new(0, k, refl, Vector3::zeros(), 100, 100).is_err());
    }

    #[test]
    fn back_project_principal_ray_unit_focal() {
        let cam = simple_camera(1.0, 1.0, 0.0, 0.0, 4, 4);
        let depth = ScalarMap::filled(4, 4, 1.0);
        let p = back_project(&depth, &cam, (0, 0)).unwrap();
        assert_relative_eq!(p, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn back_project_principal_point() {
        let cam = simple_camera(100.0, 100.0, 50.0, 50.0, 101, 101);
        let depth = ScalarMap::filled(101, 101, 2.0);
        let p = back_project(&depth, &cam, (50, 50)).unwrap();
        assert_relative_eq!(p, Vector3::new(0.0, 0.0, 2.0), epsilon = 1e-12);
    }

    #[test]
    fn back_project_matches_explicit_inverse() {
        // oracle: K^{-1} written out by hand for a pinhole K
        let (fx, fy, cx, cy) = (100.0, 100.0, 50.0, 50.0);
        let cam = simple_camera(fx, fy, cx, cy, 200, 101);
        let depth = ScalarMap::filled(200, 101, 2.0);
        let k_inv_oracle = Matrix3::new(
            1.0 / fx,
            0.0,
            -cx / fx,
            0.0,
            1.0 / fy,
            -cy / fy,
            0.0,
            0.0,
            1.0,
        );
        let expected = 2.0 * k_inv_oracle * Vector3::new(150.0, 50.0, 1.0);
        let p = back_project(&depth, &cam, (150, 50)).unwrap();
        assert_relative_eq!(p, expected, epsilon = 1e-12);
        assert_relative_eq!(p, Vector3::new(2.0, 0.0, 2.0), epsilon = 1e-12);
    }

    #[test]
    fn back_project_errors() {
        let cam = simple_camera(100.0, 100.0, 50.0, 50.0, 101, 101);
        let mut depth = ScalarMap::filled(101, 101, 2.0);
        depth.set(3, 3, f64::NAN);
        assert!(matches!(
            back_project(&depth, &cam, (200, 0)),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(matches!(
            back_project(&depth, &cam, (3, 3)),
            Err(Error::InvalidSample { .. })
        ));
    }

    #[test]
    fn transform_identity_is_projection() {
        let cam = simple_camera(100.0, 100.0, 50.0, 50.0, 101, 101);
        let p = Vector3::new(0.4, -0.2, 3.0);
        let out = transform_point(&p, &cam, &cam);
        assert_relative_eq!(out.point, p, epsilon = 1e-12);
        assert!(!out.behind);
        let (u, v) = cam.project_cam(&p);
        assert_relative_eq!(out.pixel.0, u, epsilon = 1e-12);
        assert_relative_eq!(out.pixel.1, v, epsilon = 1e-12);
    }

    #[test]
    fn transform_hand_composed_translation() {
        // target shifted one meter forward along the shared optical axis:
        // x_t = x_s - (0,0,1) in camera axes, i.e. t_t = t_s - (0,0,1) with R = I
        let k = Matrix3::new(100.0, 0.0, 50.0, 0.0, 100.0, 50.0, 0.0, 0.0, 1.0);
        let source =
            CameraView::new(0, k, Matrix3::identity(), Vector3::zeros(), 101, 101).unwrap();
        let target = CameraView::new(
            1,
            k,
            Matrix3::identity(),
            Vector3::new(0.0, 0.0, -1.0),
            101,
            101,
        )
        .unwrap();
        let out = transform_point(&Vector3::new(0.0, 0.0, 2.0), &source, &target);
        assert_relative_eq!(out.point, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn transform_behind_camera_flagged() {
        let k = Matrix3::new(100.0, 0.0, 50.0, 0.0, 100.0, 50.0, 0.0, 0.0, 1.0);
        let source =
            CameraView::new(0, k, Matrix3::identity(), Vector3::zeros(), 101, 101).unwrap();
        let target = CameraView::new(
            1,
            k,
            rot_z(std::f64::consts::PI) * rot_x_pi(),
            Vector3::zeros(),
            101,
            101,
        )
        .unwrap();
        let out = transform_point(&Vector3::new(0.0, 0.0, 2.0), &source, &target);
        assert!(out.behind);
    }

    fn rot_x_pi() -> Matrix3<f64> {
        // 180 degrees about x: looks down -z
        Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0)
    }

    #[test]
    fn normals_fronto_parallel_plane() {
        let cam = simple_camera(100.0, 100.0, 16.0, 16.0, 33, 33);
        let depth = ScalarMap::filled(33, 33, 2.5);
        let n = normal_from_depth(&depth, &cam, 1);
        for v in 1..32 {
            for u in 1..32 {
                assert!(n.is_valid(u, v), "invalid at ({u},{v})");
                assert_relative_eq!(n.get(u, v), Vector3::new(0.0, 0.0, -1.0), epsilon = 1e-9);
            }
        }
        assert!(!n.is_valid(0, 0));
    }

    /// Depth synthesized from a true 3D plane gives back its normal exactly.
    #[test]
    fn normals_of_synthetic_plane_match_analytic() {
        let cam = simple_camera(100.0, 100.0, 32.0, 32.0, 65, 65);
        let n_true = Vector3::new(0.2, -0.1, -0.97).normalize();
        let delta = -2.0; // plane: P . n = delta, facing the camera
        let depth = ScalarMap::from_fn(65, 65, |u, v| {
            let ray = cam.ray_dir(u as f64, v as f64);
            delta / n_true.dot(&ray)
        });
        let n = normal_from_depth(&depth, &cam, 1);
        for v in 1..64 {
            for u in 1..64 {
                assert!(n.is_valid(u, v));
                assert!(
                    (n.get(u, v) - n_true).norm() < 1e-9,
                    "normal off at ({u},{v}): {:?}",
                    n.get(u, v)
                );
            }
        }
    }

    /// The slanted ramp z = 1 + 0.001 (u - cx). In 3D it is the surface
    /// F(x, z) = z - 1 - 0.001 fx x / z = 0, whose analytic (scaled) gradient
    /// at a pixel with a = u - cx is (-0.001 fx, 0, 1 + 0.002 a).
    #[test]
    fn normals_of_slanted_ramp() {
        let (fx, cx) = (100.0, 32.0);
        let cam = simple_camera(fx, 100.0, cx, 32.0, 65, 65);
        let depth = ScalarMap::from_fn(65, 65, |u, _| 1.0 + 0.001 * (u as f64 - cx));
        let n = normal_from_depth(&depth, &cam, 1);
        for v in 20..45 {
            for u in 20..45 {
                let a = u as f64 - cx;
                // toward-camera orientation flips the sign
                let expected = -Vector3::new(-0.001 * fx, 0.0, 1.0 + 0.002 * a).normalize();
                assert!(
                    (n.get(u, v) - expected).norm() < 1e-4,
                    "at ({u},{v}): {:?} vs {:?}",
                    n.get(u, v),
                    expected
                );
            }
        }
    }

    #[test]
    fn normals_all_nan_when_single_pixel_valid() {
        let cam = simple_camera(100.0, 100.0, 8.0, 8.0, 17, 17);
        let mut depth = ScalarMap::invalid(17, 17);
        depth.set(8, 8, 2.0);
        let n = normal_from_depth(&depth, &cam, 1);
        assert_eq!(n.valid_count(), 0);
    }

    #[test]
    fn plane_distance_fronto() {
        let cam = simple_camera(100.0, 100.0, 16.0, 16.0, 33, 33);
        let z0 = 2.0;
        let depth = ScalarMap::filled(33, 33, z0);
        let normals = normal_from_depth(&depth, &cam, 1);
        let dist = plane_distance_map(&depth, &normals, &cam);
        for v in 1..32 {
            for u in 1..32 {
                assert_relative_eq!(dist.get(u, v), -z0, epsilon = 1e-9);
            }
        }
        assert!(dist.get(0, 0).is_nan());
    }

    /// Plane-to-camera distance is pixel-invariant on a slanted plane.
    #[test]
    fn plane_distance_constant_on_synthetic_plane() {
        let cam = simple_camera(120.0, 110.0, 32.0, 32.0, 65, 65);
        let n_true = Vector3::new(0.3, 0.2, -0.93).normalize();
        let delta = -1.7;
        let depth = ScalarMap::from_fn(65, 65, |u, v| {
            let ray = cam.ray_dir(u as f64, v as f64);
            delta / n_true.dot(&ray)
        });
        let normals = normal_from_depth(&depth, &cam, 1);
        let dist = plane_distance_map(&depth, &normals, &cam);
        let mut vals = Vec::new();
        for v in 1..64 {
            for u in 1..64 {
                if dist.is_valid(u, v) {
                    vals.push(dist.get(u, v));
                }
            }
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let std =
            (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        assert_relative_eq!(mean, delta, epsilon = 1e-6);
        assert!(std < 1e-4 * mean.abs(), "std {std} too large");
    }

    #[test]
    fn plane_distance_propagates_nan() {
        let cam = simple_camera(100.0, 100.0, 8.0, 8.0, 17, 17);
        let depth = ScalarMap::filled(17, 17, 2.0);
        let mut normals = normal_from_depth(&depth, &cam, 1);
        normals.set(5, 5, Vector3::repeat(f64::NAN));
        let dist = plane_distance_map(&depth, &normals, &cam);
        assert!(dist.get(5, 5).is_nan());
        assert!(dist.is_valid(6, 6));
    }

    proptest! {
        #[test]
        fn backproject_project_roundtrip(
            u in 0usize..200, v in 0usize..150, d in 0.05f64..50.0
        ) {
            let cam = simple_camera(123.0, 117.0, 99.5, 74.5, 200, 150);
            let mut depth = ScalarMap::filled(200, 150, 1.0);
            depth.set(u, v, d);
            let p = back_project(&depth, &cam, (u, v)).unwrap();
            prop_assert!((p.z - d).abs() < 1e-12);
            let (pu, pv) = cam.project_cam(&p);
            prop_assert!((pu - u as f64).abs() < 1e-9);
            prop_assert!((pv - v as f64).abs() < 1e-9);
        }

        #[test]
        fn transform_roundtrip_is_identity(
            px in -5.0f64..5.0, py in -5.0f64..5.0, pz in 0.1f64..10.0,
            angle in -3.0f64..3.0, tx in -2.0f64..2.0
        ) {
            let k = Matrix3::new(100.0, 0.0, 50.0, 0.0, 100.0, 50.0, 0.0, 0.0, 1.0);
            let a = CameraView::new(0, k, Matrix3::identity(), Vector3::zeros(), 101, 101).unwrap();
            let b = CameraView::new(
                1, k, rot_z(angle), Vector3::new(tx, 0.3, -0.2), 101, 101,
            ).unwrap();
            let p = Vector3::new(px, py, pz);
            let fwd = transform_point(&p, &a, &b);
            let back = transform_point(&fwd.point, &b, &a);
            prop_assert!((back.point - p).norm() < 1e-9);
        }

        #[test]
        fn normals_are_unit(seed in 0u64..50) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cam = simple_camera(90.0, 90.0, 10.0, 10.0, 21, 21);
            let depth = ScalarMap::from_fn(21, 21, |_, _| 1.0 + rng.random_range(0.0..2.0));
            let n = normal_from_depth(&depth, &cam, 1);
            for v in 0..21 {
                for u in 0..21 {
                    if n.is_valid(u, v) {
                        prop_assert!((n.get(u, v).norm() - 1.0).abs() < 1e-6);
                    }
                }
            }
        }
    }
}
