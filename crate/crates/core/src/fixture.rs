//! Synthetic indoor fixtures: a closed box room, wall arrangements for
//! label-splitting tests, and a room with a ball of clutter. Generates exact
//! ground-truth renders plus deliberately imperfect inputs (noisy and
//! affine-distorted depth priors, merged or missing mask proposals, sparse
//! depth with gross outliers) for the full pipeline.

use crate::error::Result;
use crate::fusion::Mesh;
use crate::geometry::CameraView;
use crate::lp3::{BoxProposal, MaskProposal};
use crate::priors::{SparseDepth, SparseSample};
use crate::raster::{BoolMap, ScalarMap, VectorMap};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    BoxRoom,
    TwoWalls,
    SphereInRoom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallLayout {
    /// Fronto wall plus a perpendicular side wall.
    Perp,
    /// Two parallel fronto walls at different distances joined by a side
    /// wall; exercises both split mechanisms.
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureParams {
    pub kind: FixtureKind,
    pub width: usize,
    pub height: usize,
    pub n_views: usize,
    pub fov_deg: f64,
    /// Amplitude of the smooth prior-depth error field, meters.
    pub noise_sigma: f64,
    /// Lattice resolution of the smooth error field.
    pub noise_cells: usize,
    /// Injected affine distortion: the stored dense prior is
    /// `(gt + noise - affine_t) / affine_s`.
    pub affine_s: f64,
    pub affine_t: f64,
    pub sparse_per_view: usize,
    pub sparse_outlier_frac: f64,
    pub layout: WallLayout,
    /// Merge all wall-class masks of a view into one proposal.
    pub merged_masks: bool,
    /// Every k-th view drops its largest proposal (0 keeps all).
    pub drop_mask_every: usize,
    pub low_conf_blobs: usize,
    pub seed: u64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self {
            kind: FixtureKind::BoxRoom,
            width: 128,
            height: 96,
            n_views: 20,
            fov_deg: 90.0,
            noise_sigma: 0.02,
            noise_cells: 6,
            affine_s: 1.0,
            affine_t: 0.0,
            sparse_per_view: 120,
            sparse_outlier_frac: 0.0,
            layout: WallLayout::Perp,
            merged_masks: true,
            drop_mask_every: 0,
            low_conf_blobs: 2,
            seed: 7,
        }
    }
}

/// A finite textured rectangle: `origin + s * e1 + t * e2`, s,t in [0,1].
struct Rect {
    origin: Vector3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
    normal: Vector3<f64>,
    face_id: u32,
    class: &'static str,
    base_color: Vector3<f64>,
}

struct Sphere {
    center: Vector3<f64>,
    radius: f64,
    face_id: u32,
}

struct World {
    rects: Vec<Rect>,
    sphere: Option<Sphere>,
}

pub struct FixtureData {
    pub params: FixtureParams,
    pub cams: Vec<CameraView>,
    pub images: Vec<VectorMap>,
    pub gt_depth: Vec<ScalarMap>,
    /// Per-pixel ground-truth surface id (0 = none).
    pub gt_face_ids: Vec<Vec<u32>>,
    /// Distorted dense depth prior (`affine_s * prior + affine_t` recovers
    /// the metric noisy depth).
    pub prior_depth: Vec<ScalarMap>,
    pub confidence: Vec<ScalarMap>,
    pub sparse: Vec<SparseDepth>,
    pub boxes: Vec<Vec<BoxProposal>>,
    pub masks: Vec<Vec<MaskProposal>>,
    pub adjacency: Vec<Vec<usize>>,
    pub gt_mesh: Mesh,
    /// World coordinates of the reconstruction volume.
    pub bounds: (Vector3<f64>, Vector3<f64>),
}

pub fn generate(params: &FixtureParams) -> Result<FixtureData> {
    let world = build_world(params);
    let cams = make_cameras(params);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut images = Vec::new();
    let mut gt_depth = Vec::new();
    let mut gt_face_ids = Vec::new();
    let mut prior_depth = Vec::new();
    let mut confidence = Vec::new();
    let mut sparse = Vec::new();
    let mut masks_all = Vec::new();
    let mut boxes_all = Vec::new();

    for cam in &cams {
        let (w, h) = (cam.width, cam.height);
        let mut depth = ScalarMap::invalid(w, h);
        let mut faces = vec![0u32; w * h];
        let mut image = VectorMap::filled(w, h, Vector3::repeat(0.02));
        for v in 0..h {
            for u in 0..w {
                if let Some(hit) = cast_ray(&world, cam, u as f64, v as f64) {
                    depth.set(u, v, hit.depth);
                    faces[v * w + u] = hit.face_id;
                    image.set(u, v, hit.color);
                }
            }
        }

        // smooth per-view error field plus the affine distortion
        let noise = smooth_noise(w, h, params.noise_cells, params.noise_sigma, &mut rng);
        let dense = ScalarMap::from_fn(w, h, |u, v| {
            let d = depth.get(u, v);
            if !d.is_finite() {
                return f64::NAN;
            }
            let noisy = (d + noise.get(u, v)).max(0.05);
            (noisy - params.affine_t) / params.affine_s
        });

        let mut conf = ScalarMap::filled(w, h, 2.0);
        for _ in 0..params.low_conf_blobs {
            let cu = rng.random_range(0..w);
            let cv = rng.random_range(0..h);
            let r = rng.random_range(4..10) as isize;
            for dv in -r..=r {
                for du in -r..=r {
                    if du * du + dv * dv > r * r {
                        continue;
                    }
                    let (uu, vv) = (cu as isize + du, cv as isize + dv);
                    if uu >= 0 && vv >= 0 && (uu as usize) < w && (vv as usize) < h {
                        conf.set(uu as usize, vv as usize, 0.5);
                    }
                }
            }
        }

        let mut samples = Vec::new();
        let n_outliers = (params.sparse_per_view as f64 * params.sparse_outlier_frac).round() as usize;
        for k in 0..params.sparse_per_view {
            let u = rng.random_range(0..w);
            let v = rng.random_range(0..h);
            let d = depth.get(u, v);
            if !d.is_finite() {
                continue;
            }
            let depth_m = if k < n_outliers {
                d * rng.random_range(1.5..3.0)
            } else {
                d
            };
            samples.push(SparseSample {
                u: u as f64,
                v: v as f64,
                depth_m,
            });
        }
        sparse.push(SparseDepth {
            view_id: cam.id,
            samples,
        });

        let (view_masks, view_boxes) = make_proposals(params, cam, &world, &faces, &mut rng);
        masks_all.push(view_masks);
        boxes_all.push(view_boxes);

        images.push(image);
        gt_depth.push(depth);
        gt_face_ids.push(faces);
        prior_depth.push(dense);
        confidence.push(conf);
    }

    let n = cams.len();
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut nb = Vec::new();
            for d in [1usize, 2] {
                if n > d {
                    nb.push((i + d) % n);
                    nb.push((i + n - d) % n);
                }
            }
            nb.sort_unstable();
            nb.dedup();
            nb.retain(|&j| j != i);
            nb
        })
        .collect();

    let gt_mesh = world_mesh(&world);
    let bounds = world_bounds(&world);

    Ok(FixtureData {
        params: params.clone(),
        cams,
        images,
        gt_depth,
        gt_face_ids,
        prior_depth,
        confidence,
        sparse,
        boxes: boxes_all,
        masks: masks_all,
        adjacency,
        gt_mesh,
        bounds,
    })
}

struct Hit {
    depth: f64,
    face_id: u32,
    color: Vector3<f64>,
    _point: Vector3<f64>,
}

fn cast_ray(world: &World, cam: &CameraView, u: f64, v: f64) -> Option<Hit> {
    let dir_cam = cam.ray_dir(u, v);
    let dir_world = cam.r().transpose() * dir_cam;
    let origin = cam.center();
    let mut best: Option<(f64, u32, Vector3<f64>, Vector3<f64>)> = None;
    for rect in &world.rects {
        let denom = dir_world.dot(&rect.normal);
        if denom.abs() < 1e-12 {
            continue;
        }
        let s = (rect.origin - origin).dot(&rect.normal) / denom;
        if s <= 1e-6 {
            continue;
        }
        let p = origin + dir_world * s;
        let rel = p - rect.origin;
        let (l1, l2) = (rect.e1.norm_squared(), rect.e2.norm_squared());
        let a = rel.dot(&rect.e1) / l1;
        let b = rel.dot(&rect.e2) / l2;
        if !(-1e-9..=1.0 + 1e-9).contains(&a) || !(-1e-9..=1.0 + 1e-9).contains(&b) {
            continue;
        }
        if best.map_or(true, |(bs, ..)| s < bs) {
            let color = rect.base_color * texture(&p);
            best = Some((s, rect.face_id, color, p));
        }
    }
    if let Some(sp) = &world.sphere {
        let oc = origin - sp.center;
        let b = 2.0 * oc.dot(&dir_world);
        let c = oc.norm_squared() - sp.radius * sp.radius;
        let a_coef = dir_world.norm_squared();
        let disc = b * b - 4.0 * a_coef * c;
        if disc > 0.0 {
            let s = (-b - disc.sqrt()) / (2.0 * a_coef);
            if s > 1e-6 && best.map_or(true, |(bs, ..)| s < bs) {
                let p = origin + dir_world * s;
                best = Some((s, sp.face_id, Vector3::new(0.85, 0.75, 0.35) * texture(&p), p));
            }
        }
    }
    best.map(|(s, face_id, color, p)| Hit {
        // ray parameter along K^{-1} p~ equals camera-frame z
        depth: s,
        face_id,
        color,
        _point: p,
    })
}

/// Mostly-smooth albedo with occasional sharp grid lines; the lines anchor
/// the photometric loss and give the edge detector something to find.
fn texture(p: &Vector3<f64>) -> f64 {
    let smooth = 0.82 + 0.13 * (2.1 * p.x).sin() * (1.7 * p.y + 0.5).sin() * (2.3 * p.z).cos();
    let line = |x: f64| {
        let f = (x * 1.25).fract().abs();
        f < 0.035 || f > 0.965
    };
    if line(p.x) || line(p.y) || line(p.z) {
        smooth * 0.45
    } else {
        smooth
    }
}

fn smooth_noise(
    w: usize,
    h: usize,
    cells: usize,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> ScalarMap {
    let cells = cells.max(2);
    let mut lattice = vec![0.0; cells * cells];
    for v in lattice.iter_mut() {
        // Box-Muller from two uniforms keeps the dependency surface small
        let u1: f64 = rng.random_range(1e-12..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        *v = sigma * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    }
    ScalarMap::from_fn(w, h, |u, v| {
        let x = u as f64 / (w - 1).max(1) as f64 * (cells - 1) as f64;
        let y = v as f64 / (h - 1).max(1) as f64 * (cells - 1) as f64;
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(cells - 1), (y0 + 1).min(cells - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let at = |i: usize, j: usize| lattice[j * cells + i];
        at(x0, y0) * (1.0 - fx) * (1.0 - fy)
            + at(x1, y0) * fx * (1.0 - fy)
            + at(x0, y1) * (1.0 - fx) * fy
            + at(x1, y1) * fx * fy
    })
}

fn build_world(params: &FixtureParams) -> World {
    match params.kind {
        FixtureKind::BoxRoom => World {
            rects: box_room_rects(),
            sphere: None,
        },
        FixtureKind::SphereInRoom => World {
            rects: box_room_rects(),
            sphere: Some(Sphere {
                center: Vector3::new(0.45, -0.35, 0.25),
                radius: 0.3,
                face_id: 7,
            }),
        },
        FixtureKind::TwoWalls => World {
            rects: wall_rects(params.layout),
            sphere: None,
        },
    }
}

/// Axis-aligned room [-1, 1]^3 with inward-facing faces.
fn box_room_rects() -> Vec<Rect> {
    let s = 1.0;
    let mk = |origin: [f64; 3], e1: [f64; 3], e2: [f64; 3], n: [f64; 3], id: u32, class: &'static str, color: [f64; 3]| {
        Rect {
            origin: Vector3::from(origin),
            e1: Vector3::from(e1),
            e2: Vector3::from(e2),
            normal: Vector3::from(n),
            face_id: id,
            class,
            base_color: Vector3::from(color),
        }
    };
    vec![
        // walls: +x, -x, +y, -y
        mk([s, -s, -s], [0.0, 2.0 * s, 0.0], [0.0, 0.0, 2.0 * s], [-1.0, 0.0, 0.0], 1, "wall", [0.78, 0.36, 0.32]),
        mk([-s, -s, -s], [0.0, 2.0 * s, 0.0], [0.0, 0.0, 2.0 * s], [1.0, 0.0, 0.0], 2, "wall", [0.34, 0.74, 0.38]),
        mk([-s, s, -s], [2.0 * s, 0.0, 0.0], [0.0, 0.0, 2.0 * s], [0.0, -1.0, 0.0], 3, "wall", [0.36, 0.42, 0.8]),
        mk([-s, -s, -s], [2.0 * s, 0.0, 0.0], [0.0, 0.0, 2.0 * s], [0.0, 1.0, 0.0], 4, "wall", [0.74, 0.72, 0.34]),
        // ceiling +z, floor -z
        mk([-s, -s, s], [2.0 * s, 0.0, 0.0], [0.0, 2.0 * s, 0.0], [0.0, 0.0, -1.0], 5, "ceiling", [0.72, 0.44, 0.72]),
        mk([-s, -s, -s], [2.0 * s, 0.0, 0.0], [0.0, 2.0 * s, 0.0], [0.0, 0.0, 1.0], 6, "floor", [0.42, 0.72, 0.74]),
    ]
}

/// Wall arrangements in front of cameras near the origin looking down +z
/// (world frame equals the first camera's frame).
fn wall_rects(layout: WallLayout) -> Vec<Rect> {
    let big = 8.0;
    match layout {
        WallLayout::Perp => vec![
            // fronto wall z = 2 covering x <= 0.5
            Rect {
                origin: Vector3::new(-big, -big, 2.0),
                e1: Vector3::new(big + 0.5, 0.0, 0.0),
                e2: Vector3::new(0.0, 2.0 * big, 0.0),
                normal: Vector3::new(0.0, 0.0, -1.0),
                face_id: 1,
                class: "wall",
                base_color: Vector3::new(0.75, 0.4, 0.35),
            },
            // side wall x = 0.5 from z = 0.3 to z = 2
            Rect {
                origin: Vector3::new(0.5, -big, 0.3),
                e1: Vector3::new(0.0, 2.0 * big, 0.0),
                e2: Vector3::new(0.0, 0.0, 1.7),
                normal: Vector3::new(-1.0, 0.0, 0.0),
                face_id: 2,
                class: "wall",
                base_color: Vector3::new(0.35, 0.7, 0.4),
            },
        ],
        WallLayout::Both => vec![
            // near fronto wall z = 2 on the right (x >= 0); cameras sit left
            // of the step so the connecting side wall stays visible
            Rect {
                origin: Vector3::new(0.0, -big, 2.0),
                e1: Vector3::new(big, 0.0, 0.0),
                e2: Vector3::new(0.0, 2.0 * big, 0.0),
                normal: Vector3::new(0.0, 0.0, -1.0),
                face_id: 1,
                class: "wall",
                base_color: Vector3::new(0.75, 0.4, 0.35),
            },
            // far fronto wall z = 4 on the left (x <= 0)
            Rect {
                origin: Vector3::new(-big, -big, 4.0),
                e1: Vector3::new(big, 0.0, 0.0),
                e2: Vector3::new(0.0, 2.0 * big, 0.0),
                normal: Vector3::new(0.0, 0.0, -1.0),
                face_id: 2,
                class: "wall",
                base_color: Vector3::new(0.4, 0.65, 0.45),
            },
            // connecting side wall x = 0 between them
            Rect {
                origin: Vector3::new(0.0, -big, 2.0),
                e1: Vector3::new(0.0, 2.0 * big, 0.0),
                e2: Vector3::new(0.0, 0.0, 2.0),
                normal: Vector3::new(-1.0, 0.0, 0.0),
                face_id: 3,
                class: "wall",
                base_color: Vector3::new(0.4, 0.45, 0.75),
            },
        ],
    }
}

fn make_cameras(params: &FixtureParams) -> Vec<CameraView> {
    let (w, h) = (params.width, params.height);
    let fx = w as f64 / 2.0 / (params.fov_deg.to_radians() / 2.0).tan();
    let k = Matrix3::new(
        fx,
        0.0,
        (w as f64 - 1.0) / 2.0,
        0.0,
        fx,
        (h as f64 - 1.0) / 2.0,
        0.0,
        0.0,
        1.0,
    );
    match params.kind {
        FixtureKind::TwoWalls => {
            // a short strafing track, all looking down +z
            let base_x = match params.layout {
                WallLayout::Perp => -0.5,
                WallLayout::Both => -0.8,
            };
            (0..params.n_views)
                .map(|i| {
                    let x = base_x
                        + 0.15 * (i as f64 - (params.n_views as f64 - 1.0) / 2.0)
                            / (params.n_views as f64).max(1.0);
                    let r = Matrix3::identity();
                    let c = Vector3::new(x - 0.0, 0.0, 0.0);
                    let t = -r * c;
                    CameraView::new(i as u32, k, r, t, w, h).unwrap()
                })
                .collect()
        }
        _ => {
            // outward-looking ring on a small sphere inside the room
            let radius = 0.35;
            let n = params.n_views;
            (0..n)
                .map(|i| {
                    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                    let zf = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r_xy = (1.0 - zf * zf).sqrt();
                    let phi = golden * i as f64;
                    let dir = Vector3::new(r_xy * phi.cos(), r_xy * phi.sin(), zf);
                    let c = dir * radius;
                    let r = look_rotation(&dir);
                    let t = -r * c;
                    CameraView::new(i as u32, k, r, t, w, h).unwrap()
                })
                .collect()
        }
    }
}

/// World-to-camera rotation with camera z along `forward`.
fn look_rotation(forward: &Vector3<f64>) -> Matrix3<f64> {
    let f = forward.normalize();
    let up = if f.z.abs() < 0.95 {
        Vector3::z()
    } else {
        Vector3::x()
    };
    let right = up.cross(&f).normalize();
    let down = f.cross(&right);
    Matrix3::from_rows(&[right.transpose(), down.transpose(), f.transpose()])
}

fn make_proposals(
    params: &FixtureParams,
    cam: &CameraView,
    world: &World,
    faces: &[u32],
    rng: &mut ChaCha8Rng,
) -> (Vec<MaskProposal>, Vec<BoxProposal>) {
    let (w, h) = (cam.width, cam.height);
    let min_px = (w * h) / 100;
    let mut class_of = std::collections::HashMap::new();
    for r in &world.rects {
        class_of.insert(r.face_id, r.class);
    }
    if let Some(s) = &world.sphere {
        class_of.insert(s.face_id, "wall"); // a bad proposal on purpose
    }

    // pixel sets per face
    let mut per_face: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for (i, &f) in faces.iter().enumerate() {
        if f > 0 {
            per_face.entry(f).or_default().push(i);
        }
    }

    let mut masks = Vec::new();
    if params.merged_masks {
        // one merged mask for all wall-class pixels, separate masks otherwise
        let mut wall_pixels = Vec::new();
        for (&f, px) in &per_face {
            if px.len() < min_px {
                continue;
            }
            if class_of[&f] == "wall" {
                wall_pixels.extend_from_slice(px);
            } else {
                masks.push(mask_from_pixels(cam, px, class_of[&f], 0.9));
            }
        }
        if wall_pixels.len() >= min_px {
            masks.push(mask_from_pixels(cam, &wall_pixels, "wall", 0.85));
        }
    } else {
        for (&f, px) in &per_face {
            if px.len() >= min_px {
                masks.push(mask_from_pixels(cam, px, class_of[&f], 0.9));
            }
        }
    }
    // jitter mask borders a little so proposals are not pixel-perfect
    for m in masks.iter_mut() {
        if rng.random_range(0..2) == 0 {
            m.mask = m.mask.dilate(1);
        } else {
            m.mask = m.mask.erode(1);
        }
    }
    masks.retain(|m| m.mask.count() >= min_px.max(1));

    if params.drop_mask_every > 0
        && !masks.is_empty()
        && (cam.id as usize + 1) % params.drop_mask_every == 0
    {
        // drop the largest proposal; neighbors must recover it
        let largest = (0..masks.len())
            .max_by_key(|&i| masks[i].mask.count())
            .unwrap();
        masks.remove(largest);
    }

    let boxes = masks
        .iter()
        .map(|m| {
            let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
            for v in 0..h {
                for u in 0..w {
                    if m.mask.get(u, v) {
                        bbox[0] = bbox[0].min(u as f64);
                        bbox[1] = bbox[1].min(v as f64);
                        bbox[2] = bbox[2].max(u as f64);
                        bbox[3] = bbox[3].max(v as f64);
                    }
                }
            }
            BoxProposal {
                view_id: cam.id,
                label: m.label.clone(),
                score: m.score,
                bbox,
            }
        })
        .collect();
    (masks, boxes)
}

fn mask_from_pixels(cam: &CameraView, pixels: &[usize], class: &str, score: f64) -> MaskProposal {
    let (w, h) = (cam.width, cam.height);
    let mut m = BoolMap::filled(w, h, false);
    for &i in pixels {
        m.set(i % w, i / w, true);
    }
    MaskProposal {
        view_id: cam.id,
        label: class.to_string(),
        score,
        mask: m,
    }
}

fn world_mesh(world: &World) -> Mesh {
    let mut mesh = Mesh::empty();
    for r in &world.rects {
        let base = mesh.vertices.len() as u32;
        mesh.vertices.push(r.origin);
        mesh.vertices.push(r.origin + r.e1);
        mesh.vertices.push(r.origin + r.e1 + r.e2);
        mesh.vertices.push(r.origin + r.e2);
        mesh.triangles.push([base, base + 1, base + 2]);
        mesh.triangles.push([base, base + 2, base + 3]);
    }
    if let Some(s) = &world.sphere {
        append_uv_sphere(&mut mesh, s.center, s.radius, 24, 12);
    }
    mesh
}

fn append_uv_sphere(mesh: &mut Mesh, center: Vector3<f64>, r: f64, seg: usize, rings: usize) {
    let base = mesh.vertices.len() as u32;
    for j in 0..=rings {
        let theta = std::f64::consts::PI * j as f64 / rings as f64;
        for i in 0..seg {
            let phi = std::f64::consts::TAU * i as f64 / seg as f64;
            mesh.vertices.push(
                center
                    + r * Vector3::new(
                        theta.sin() * phi.cos(),
                        theta.sin() * phi.sin(),
                        theta.cos(),
                    ),
            );
        }
    }
    let idx = |j: usize, i: usize| base + (j * seg + (i % seg)) as u32;
    for j in 0..rings {
        for i in 0..seg {
            mesh.triangles.push([idx(j, i), idx(j + 1, i), idx(j + 1, i + 1)]);
            mesh.triangles.push([idx(j, i), idx(j + 1, i + 1), idx(j, i + 1)]);
        }
    }
}

fn world_bounds(world: &World) -> (Vector3<f64>, Vector3<f64>) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    let mut grow = |p: Vector3<f64>| {
        for c in 0..3 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    };
    for r in &world.rects {
        grow(r.origin);
        grow(r.origin + r.e1);
        grow(r.origin + r.e2);
        grow(r.origin + r.e1 + r.e2);
    }
    if let Some(s) = &world.sphere {
        grow(s.center - Vector3::repeat(s.radius));
        grow(s.center + Vector3::repeat(s.radius));
    }
    (lo, hi)
}
