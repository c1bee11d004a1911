//! TSDF fusion of rendered depth maps into a voxel volume and isosurface
//! extraction via marching cubes with shared, interpolated edge vertices.

pub mod tables;

use crate::error::{Error, Result};
use crate::geometry::CameraView;
use crate::raster::{ScalarMap, VectorMap};
use nalgebra::Vector3;
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub colors: Option<Vec<Vector3<f64>>>,
}

impl Mesh {
    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            triangles: Vec::new(),
            normals: None,
            colors: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        if self.vertices.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidConfig("mesh has non-finite vertices".into()));
        }
        if self.triangles.iter().flatten().any(|&i| i >= n) {
            return Err(Error::InvalidConfig("triangle index out of range".into()));
        }
        Ok(())
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (a, b, c) = (
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        );
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn triangle_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangles[t];
        let (a, b, c) = (
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        );
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len > 1e-18 {
            n / len
        } else {
            Vector3::z()
        }
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct TsdfVolume {
    pub origin: Vector3<f64>,
    pub voxel_size: f64,
    pub dims: (usize, usize, usize),
    /// Truncation distance in meters.
    pub trunc: f64,
    pub tsdf: Vec<f64>,
    pub weight: Vec<f64>,
    color: Vec<Vector3<f64>>,
}

impl TsdfVolume {
    pub fn new(origin: Vector3<f64>, voxel_size: f64, dims: (usize, usize, usize), trunc: f64) -> Self {
        let n = dims.0 * dims.1 * dims.2;
        Self {
            origin,
            voxel_size,
            dims,
            trunc,
            tsdf: vec![1.0; n],
            weight: vec![0.0; n],
            color: vec![Vector3::zeros(); n],
        }
    }

    /// Volume spanning an axis-aligned box with a margin.
    pub fn for_bounds(lo: Vector3<f64>, hi: Vector3<f64>, voxel_size: f64, trunc: f64) -> Self {
        let margin = trunc + voxel_size;
        let lo = lo - Vector3::repeat(margin);
        let hi = hi + Vector3::repeat(margin);
        let dims = (
            ((hi.x - lo.x) / voxel_size).ceil() as usize + 1,
            ((hi.y - lo.y) / voxel_size).ceil() as usize + 1,
            ((hi.z - lo.z) / voxel_size).ceil() as usize + 1,
        );
        Self::new(lo, voxel_size, dims, trunc)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims.1 + j) * self.dims.0 + i
    }

    #[inline]
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        self.origin
            + Vector3::new(
                i as f64 * self.voxel_size,
                j as f64 * self.voxel_size,
                k as f64 * self.voxel_size,
            )
    }

    /// Integrate one depth map (optionally with a color image). Per voxel in
    /// the frustum: `sdf = depth(project(voxel)) - voxel_z`; voxels closer
    /// than one truncation band behind the surface average
    /// `clamp(sdf / trunc, -1, 1)` with unit weight.
    pub fn integrate(
        &mut self,
        depth: &ScalarMap,
        color: Option<&VectorMap>,
        cam: &CameraView,
        depth_max: f64,
    ) {
        let (nx, ny, nz) = self.dims;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let p_world = self.voxel_center(i, j, k);
                    let p_cam = cam.world_to_cam(&p_world);
                    if p_cam.z <= 0.0 {
                        continue;
                    }
                    let (u, v) = cam.project_cam(&p_cam);
                    let (ui, vi) = (u.round(), v.round());
                    if !cam.contains_pixel(ui, vi) {
                        continue;
                    }
                    let (ui, vi) = (ui as usize, vi as usize);
                    let d = depth.get(ui, vi);
                    if !d.is_finite() || d <= 0.0 || d > depth_max {
                        continue;
                    }
                    let sdf = d - p_cam.z;
                    if sdf <= -self.trunc {
                        continue;
                    }
                    let t = (sdf / self.trunc).clamp(-1.0, 1.0);
                    let idx = self.idx(i, j, k);
                    let w = self.weight[idx];
                    self.tsdf[idx] = (self.tsdf[idx] * w + t) / (w + 1.0);
                    if let Some(img) = color {
                        let c = img.get(ui, vi);
                        self.color[idx] = (self.color[idx] * w + c) / (w + 1.0);
                    }
                    self.weight[idx] = w + 1.0;
                }
            }
        }
    }

    fn corner(&self, i: usize, j: usize, k: usize) -> (f64, f64, Vector3<f64>) {
        let idx = self.idx(i, j, k);
        (self.tsdf[idx], self.weight[idx], self.color[idx])
    }
}

const CORNER_OFFSETS: [(usize, usize, usize); 8] = [
    (0, 0, 0),
    (1, 0, 0),
    (1, 1, 0),
    (0, 1, 0),
    (0, 0, 1),
    (1, 0, 1),
    (1, 1, 1),
    (0, 1, 1),
];

const EDGE_CORNERS: [(usize, usize); 12] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 0),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 4),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Extract the zero isosurface. Cubes with any unobserved corner
/// (weight = 0) are skipped; shared edge vertices are deduplicated so the
/// mesh is watertight wherever the data is closed.
pub fn marching_cubes(vol: &TsdfVolume) -> Mesh {
    let (nx, ny, nz) = vol.dims;
    let mut mesh = Mesh::empty();
    let mut colors: Vec<Vector3<f64>> = Vec::new();
    // canonical edge key: (i, j, k, axis) of the edge's low corner
    let mut edge_vertices: HashMap<(usize, usize, usize, u8), u32> = HashMap::new();

    for k in 0..nz.saturating_sub(1) {
        for j in 0..ny.saturating_sub(1) {
            for i in 0..nx.saturating_sub(1) {
                let mut values = [0.0f64; 8];
                let mut cols = [Vector3::zeros(); 8];
                let mut observed = true;
                for (c, &(di, dj, dk)) in CORNER_OFFSETS.iter().enumerate() {
                    let (t, w, col) = vol.corner(i + di, j + dj, k + dk);
                    if w <= 0.0 {
                        observed = false;
                        break;
                    }
                    values[c] = t;
                    cols[c] = col;
                }
                if !observed {
                    continue;
                }
                let mut cube = 0usize;
                for (c, &val) in values.iter().enumerate() {
                    if val < 0.0 {
                        cube |= 1 << c;
                    }
                }
                if cube == 0 || cube == 255 {
                    continue;
                }
                let tris = &tables::TRIANGLE_TABLE[cube];
                let mut e = 0;
                while e < 16 && tris[e] >= 0 {
                    let mut tri = [0u32; 3];
                    for (slot, &edge) in tris[e..e + 3].iter().enumerate() {
                        let edge = edge as usize;
                        let (c0, c1) = EDGE_CORNERS[edge];
                        let key = edge_key(i, j, k, c0, c1);
                        let vid = *edge_vertices.entry(key).or_insert_with(|| {
                            let (v0, v1) = (values[c0], values[c1]);
                            let t = if (v1 - v0).abs() < 1e-15 {
                                0.5
                            } else {
                                (0.0 - v0) / (v1 - v0)
                            };
                            let (o0, o1) = (CORNER_OFFSETS[c0], CORNER_OFFSETS[c1]);
                            let p0 = vol.voxel_center(i + o0.0, j + o0.1, k + o0.2);
                            let p1 = vol.voxel_center(i + o1.0, j + o1.1, k + o1.2);
                            let id = mesh.vertices.len() as u32;
                            mesh.vertices.push(p0 + (p1 - p0) * t);
                            colors.push(cols[c0] + (cols[c1] - cols[c0]) * t);
                            id
                        });
                        tri[slot] = vid;
                    }
                    mesh.triangles.push(tri);
                    e += 3;
                }
            }
        }
    }
    if !mesh.vertices.is_empty() {
        mesh.colors = Some(colors);
    }
    mesh
}

/// Canonical (low corner, axis) identity of a cube edge in global voxel
/// coordinates, shared across neighboring cubes.
fn edge_key(i: usize, j: usize, k: usize, c0: usize, c1: usize) -> (usize, usize, usize, u8) {
    let o0 = CORNER_OFFSETS[c0];
    let o1 = CORNER_OFFSETS[c1];
    let p0 = (i + o0.0, j + o0.1, k + o0.2);
    let p1 = (i + o1.0, j + o1.1, k + o1.2);
    let low = if p0 <= p1 { p0 } else { p1 };
    let axis = if o0.0 != o1.0 {
        0
    } else if o0.1 != o1.1 {
        1
    } else {
        2
    };
    (low.0, low.1, low.2, axis)
}
