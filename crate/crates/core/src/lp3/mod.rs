//! Refinement of raw detection/segmentation proposals into consistent
//! per-view plane label maps: cross-view box fusion, nested-box filtering,
//! geometric inspection (normal clustering + plane-distance outlier
//! splitting), and label-map assembly.

pub mod kmeans;

use crate::error::Result;
use crate::geometry::{back_project, transform_point, CameraView};
use crate::raster::{BoolMap, ScalarMap, VectorMap};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxProposal {
    pub view_id: u32,
    pub label: String,
    pub score: f64,
    /// (u_min, v_min, u_max, v_max) in pixels.
    pub bbox: [f64; 4],
}

impl BoxProposal {
    pub fn area(&self) -> f64 {
        (self.bbox[2] - self.bbox[0]).max(0.0) * (self.bbox[3] - self.bbox[1]).max(0.0)
    }

    pub fn clamp_to(&mut self, width: usize, height: usize) {
        self.bbox[0] = self.bbox[0].clamp(0.0, (width - 1) as f64);
        self.bbox[1] = self.bbox[1].clamp(0.0, (height - 1) as f64);
        self.bbox[2] = self.bbox[2].clamp(0.0, (width - 1) as f64);
        self.bbox[3] = self.bbox[3].clamp(0.0, (height - 1) as f64);
    }

    pub fn intersection_area(&self, other: &BoxProposal) -> f64 {
        let u0 = self.bbox[0].max(other.bbox[0]);
        let v0 = self.bbox[1].max(other.bbox[1]);
        let u1 = self.bbox[2].min(other.bbox[2]);
        let v1 = self.bbox[3].min(other.bbox[3]);
        (u1 - u0).max(0.0) * (v1 - v0).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct MaskProposal {
    pub view_id: u32,
    pub label: String,
    pub score: f64,
    pub mask: BoolMap,
}

/// A candidate plane region inside one view.
#[derive(Debug, Clone)]
pub struct PlaneRegion {
    /// Flat pixel indices (v * width + u).
    pub pixels: Vec<u32>,
    /// Mean prior normal over the region, in the frame of the normals that
    /// were inspected (camera frame for `normal_from_depth` output).
    pub mean_normal: Vector3<f64>,
    pub class: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelInfo {
    pub id: u32,
    pub class: String,
    /// Mean prior normal of the region (world frame in pipeline outputs).
    pub normal: [f64; 3],
    pub pixel_count: usize,
}

/// Per-view plane labeling: 0 = non-planar, labels 1..=L contiguous.
#[derive(Debug, Clone)]
pub struct PlaneLabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    pub meta: Vec<LabelInfo>,
}

impl PlaneLabelMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![0; width * height],
            meta: Vec::new(),
        }
    }

    pub fn from_parts(width: usize, height: usize, labels: Vec<u32>, meta: Vec<LabelInfo>) -> Self {
        assert_eq!(labels.len(), width * height);
        Self {
            width,
            height,
            labels,
            meta,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> u32 {
        self.labels[v * self.width + u]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_count(&self) -> usize {
        self.meta.len()
    }

    pub fn pixels_of(&self, label: u32) -> Vec<u32> {
        self.labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == label)
            .map(|(i, _)| i as u32)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lp3Config {
    /// Number of k-means clusters over prior normals.
    pub kmax: usize,
    /// Clusters closer than this centroid angle are merged.
    pub merge_angle_deg: f64,
    /// Clusters with larger rms angular spread are dropped as non-planar.
    pub max_normal_spread_deg: f64,
    /// Plane-distance outlier threshold in meters.
    pub dist_outlier_m: f64,
    /// Absolute fragment floor; when absent, `min_fragment_frac` applies.
    pub min_fragment_px: Option<usize>,
    /// Fragment floor as a fraction of image area.
    pub min_fragment_frac: f64,
    /// Fuse only each neighbor's largest mask (vs. all masks).
    pub fuse_main_only: bool,
    /// Neighbor offset for normal-from-depth on priors.
    pub normal_offset_px: usize,
    /// Intersection-over-smaller threshold for nested boxes.
    pub nested_overlap: f64,
    /// Pixels with |plane distance| below this are ignored during
    /// inspection. A local plane passing almost through the camera center
    /// cannot be a visible surface; such pixels are depth-discontinuity
    /// artifacts of the cross-neighbor normal estimate.
    pub min_plane_dist_m: f64,
    pub seed: u64,
}

impl Default for Lp3Config {
    fn default() -> Self {
        Self {
            kmax: 4,
            merge_angle_deg: 10.0,
            max_normal_spread_deg: 15.0,
            dist_outlier_m: 0.05,
            min_fragment_px: None,
            min_fragment_frac: 0.005,
            fuse_main_only: true,
            normal_offset_px: 1,
            nested_overlap: 0.95,
            min_plane_dist_m: 0.15,
            seed: 0,
        }
    }
}

impl Lp3Config {
    pub fn resolve_min_fragment_px(&self, width: usize, height: usize) -> usize {
        self.min_fragment_px
            .unwrap_or(((width * height) as f64 * self.min_fragment_frac).round() as usize)
            .max(1)
    }
}

/// Minimum number of projected pixels before a cross-view transfer counts.
const MIN_TRANSFER_PX: usize = 16;

#[derive(Debug, Default)]
pub struct FusionOutput {
    /// Per view: original boxes plus accepted transfers.
    pub boxes: Vec<Vec<BoxProposal>>,
    /// Per view: masks synthesized from accepted transfers (reprojected
    /// neighbor masks, morphologically closed).
    pub transfer_masks: Vec<Vec<MaskProposal>>,
    pub warnings: Vec<String>,
}

/// Cross-view fusion of plane boxes: each neighbor's main plane mask is
/// back-projected through its depth prior, rigidly moved into the target
/// view and re-projected; the bounding box of the in-bounds, in-front pixels
/// becomes a new proposal unless it is nested in an existing same-label box.
pub fn fuse_boxes_cross_view(
    boxes: &[Vec<BoxProposal>],
    masks: &[Vec<MaskProposal>],
    depth_priors: &[Option<ScalarMap>],
    cams: &[CameraView],
    neighbors: &[Vec<usize>],
    cfg: &Lp3Config,
) -> FusionOutput {
    let n_views = cams.len();
    let mut out = FusionOutput {
        boxes: boxes.to_vec(),
        transfer_masks: vec![Vec::new(); n_views],
        warnings: Vec::new(),
    };
    for target in 0..n_views {
        let mut accepted: Vec<BoxProposal> = Vec::new();
        for &source in &neighbors[target] {
            let Some(depth) = depth_priors[source].as_ref() else {
                out.warnings.push(format!(
                    "view {}: neighbor {} has no depth prior, skipped in fusion",
                    cams[target].id, cams[source].id
                ));
                continue;
            };
            let source_masks: Vec<&MaskProposal> = if cfg.fuse_main_only {
                main_plane_mask(&masks[source]).into_iter().collect()
            } else {
                masks[source].iter().collect()
            };
            for mask in source_masks {
                if let Some((bbox, pixels)) =
                    transfer_mask(mask, depth, &cams[source], &cams[target])
                {
                    let candidate = BoxProposal {
                        view_id: cams[target].id,
                        label: mask.label.clone(),
                        score: mask.score,
                        bbox,
                    };
                    let nested = out.boxes[target]
                        .iter()
                        .chain(accepted.iter())
                        .any(|b| nested_in(&candidate, b, cfg.nested_overlap));
                    if nested {
                        continue;
                    }
                    let mut m = BoolMap::filled(cams[target].width, cams[target].height, false);
                    for &(u, v) in &pixels {
                        m.set(u, v, true);
                    }
                    let m = m.dilate(1).erode(1);
                    out.transfer_masks[target].push(MaskProposal {
                        view_id: cams[target].id,
                        label: mask.label.clone(),
                        score: mask.score,
                        mask: m,
                    });
                    accepted.push(candidate);
                }
            }
        }
        out.boxes[target].extend(accepted);
    }
    out
}

fn main_plane_mask(masks: &[MaskProposal]) -> Option<&MaskProposal> {
    masks
        .iter()
        .max_by(|a, b| a.mask.count().cmp(&b.mask.count()))
}

/// True when `candidate` would lose a nested-box comparison against `other`.
fn nested_in(candidate: &BoxProposal, other: &BoxProposal, overlap: f64) -> bool {
    if candidate.label != other.label {
        return false;
    }
    let smaller = candidate.area().min(other.area());
    if smaller <= 0.0 {
        return false;
    }
    candidate.intersection_area(other) / smaller >= overlap && candidate.area() <= other.area()
}

fn transfer_mask(
    mask: &MaskProposal,
    depth: &ScalarMap,
    source: &CameraView,
    target: &CameraView,
) -> Option<([f64; 4], Vec<(usize, usize)>)> {
    let mut pixels = Vec::new();
    for v in 0..mask.mask.height() {
        for u in 0..mask.mask.width() {
            if !mask.mask.get(u, v) {
                continue;
            }
            let Ok(p_s) = back_project(depth, source, (u, v)) else {
                continue;
            };
            let tp = transform_point(&p_s, source, target);
            if tp.behind {
                continue;
            }
            let (pu, pv) = (tp.pixel.0.round(), tp.pixel.1.round());
            if target.contains_pixel(pu, pv) {
                pixels.push((pu as usize, pv as usize));
            }
        }
    }
    if pixels.len() < MIN_TRANSFER_PX {
        return None;
    }
    let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for &(u, v) in &pixels {
        bbox[0] = bbox[0].min(u as f64);
        bbox[1] = bbox[1].min(v as f64);
        bbox[2] = bbox[2].max(u as f64);
        bbox[3] = bbox[3].max(v as f64);
    }
    Some((bbox, pixels))
}

/// Remove the smaller of any same-label pair whose intersection-over-smaller
/// is at least `cfg.nested_overlap`. Processing order: area desc, id asc.
pub fn filter_nested_boxes(boxes: &[BoxProposal], overlap: f64) -> Vec<BoxProposal> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| {
        boxes[b]
            .area()
            .total_cmp(&boxes[a].area())
            .then(a.cmp(&b))
    });
    let mut keep = vec![true; boxes.len()];
    for i in 0..order.len() {
        let a = order[i];
        if !keep[a] {
            continue;
        }
        for &b in order.iter().skip(i + 1) {
            if !keep[b] || boxes[a].label != boxes[b].label {
                continue;
            }
            let smaller = boxes[b].area();
            if smaller > 0.0 && boxes[a].intersection_area(&boxes[b]) / smaller >= overlap {
                keep[b] = false;
            }
        }
    }
    order.sort(); // restore input order among survivors
    order
        .into_iter()
        .filter(|&i| keep[i])
        .map(|i| boxes[i].clone())
        .collect()
}

const MAX_PEEL_ROUNDS: usize = 16;

/// Geometric inspection of one mask: (a) k-means over prior normals separates
/// non-parallel planes (clusters with excessive angular spread are dropped),
/// (b) plane-distance outliers relative to the running median split parallel
/// planes into 4-connected components, (c) fragments below the pixel floor
/// are discarded.
pub fn inspect_and_split(
    mask: &MaskProposal,
    prior_normals: &VectorMap,
    prior_plane_dist: &ScalarMap,
    cfg: &Lp3Config,
) -> Vec<PlaneRegion> {
    let (w, h) = (mask.mask.width(), mask.mask.height());
    let min_fragment = cfg.resolve_min_fragment_px(w, h);
    let mut idxs: Vec<u32> = Vec::new();
    let mut normals: Vec<Vector3<f64>> = Vec::new();
    for v in 0..h {
        for u in 0..w {
            if mask.mask.get(u, v)
                && prior_normals.is_valid(u, v)
                && prior_plane_dist.is_valid(u, v)
                && prior_plane_dist.get(u, v).abs() >= cfg.min_plane_dist_m
            {
                idxs.push((v * w + u) as u32);
                normals.push(prior_normals.get(u, v));
            }
        }
    }
    if idxs.is_empty() {
        return Vec::new();
    }

    let clustering = kmeans::kmeans_unit(&normals, cfg.kmax, cfg.seed, 50);
    let clustering = kmeans::merge_close_clusters(&normals, &clustering, cfg.merge_angle_deg);

    let mut regions = Vec::new();
    for (c, centroid) in clustering.centroids.iter().enumerate() {
        let members: Vec<usize> = (0..idxs.len())
            .filter(|&i| clustering.assignment[i] == c)
            .collect();
        if members.is_empty() {
            continue;
        }
        let spread = angular_spread_deg(&normals, &members, centroid);
        if spread > cfg.max_normal_spread_deg {
            continue;
        }
        split_by_plane_distance(
            &members,
            &idxs,
            &normals,
            prior_plane_dist,
            w,
            h,
            cfg,
            min_fragment,
            &mask.label,
            &mut regions,
        );
    }
    regions
}

fn angular_spread_deg(normals: &[Vector3<f64>], members: &[usize], centroid: &Vector3<f64>) -> f64 {
    let mut sum_sq = 0.0;
    for &i in members {
        let cos = normals[i].dot(centroid).clamp(-1.0, 1.0);
        let ang = cos.acos().to_degrees();
        sum_sq += ang * ang;
    }
    (sum_sq / members.len() as f64).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn split_by_plane_distance(
    members: &[usize],
    idxs: &[u32],
    normals: &[Vector3<f64>],
    plane_dist: &ScalarMap,
    w: usize,
    h: usize,
    cfg: &Lp3Config,
    min_fragment: usize,
    class: &str,
    regions: &mut Vec<PlaneRegion>,
) {
    // remaining pixels of this normal cluster, as flat indices
    let mut remaining: Vec<u32> = members.iter().map(|&i| idxs[i]).collect();
    let normal_of: std::collections::HashMap<u32, Vector3<f64>> = members
        .iter()
        .map(|&i| (idxs[i], normals[i]))
        .collect();
    let dist_of = |idx: u32| {
        let (u, v) = ((idx as usize) % w, (idx as usize) / w);
        plane_dist.get(u, v)
    };

    for _ in 0..MAX_PEEL_ROUNDS {
        if remaining.len() < min_fragment {
            break;
        }
        let mut dists: Vec<f64> = remaining.iter().map(|&i| dist_of(i)).collect();
        dists.sort_by(f64::total_cmp);
        let median = dists[(dists.len() - 1) / 2];
        let (inliers, rest): (Vec<u32>, Vec<u32>) = remaining
            .iter()
            .partition(|&&i| (dist_of(i) - median).abs() <= cfg.dist_outlier_m);
        if inliers.is_empty() {
            break;
        }
        for component in connected_components(&inliers, w, h) {
            // trim against the component's own median so each region is
            // tight around a single plane offset
            let mut cd: Vec<f64> = component.iter().map(|&i| dist_of(i)).collect();
            cd.sort_by(f64::total_cmp);
            let cmed = cd[(cd.len() - 1) / 2];
            let trimmed: Vec<u32> = component
                .into_iter()
                .filter(|&i| (dist_of(i) - cmed).abs() <= cfg.dist_outlier_m)
                .collect();
            // opening removes 1-2 px wide strips left by depth
            // discontinuities while real regions regain their border ring
            let opened = open4(&trimmed, w, h);
            for piece in connected_components(&opened, w, h) {
                if piece.len() < min_fragment {
                    continue;
                }
                let mut mean_n = Vector3::zeros();
                for &i in &piece {
                    mean_n += normal_of[&i];
                }
                let norm = mean_n.norm();
                if norm > 1e-12 {
                    mean_n /= norm;
                }
                regions.push(PlaneRegion {
                    pixels: piece,
                    mean_normal: mean_n,
                    class: class.to_string(),
                });
            }
        }
        remaining = rest;
    }
}

/// Morphological opening on a sparse pixel set: 4-neighbor erosion followed
/// by geodesic dilation back into the original set.
fn open4(pixels: &[u32], w: usize, h: usize) -> Vec<u32> {
    use std::collections::HashSet;
    let set: HashSet<u32> = pixels.iter().copied().collect();
    let in_set = |u: isize, v: isize| {
        u >= 0 && v >= 0 && (u as usize) < w && (v as usize) < h
            && set.contains(&((v as usize * w + u as usize) as u32))
    };
    let eroded: HashSet<u32> = pixels
        .iter()
        .copied()
        .filter(|&i| {
            let (u, v) = ((i as usize % w) as isize, (i as usize / w) as isize);
            in_set(u - 1, v) && in_set(u + 1, v) && in_set(u, v - 1) && in_set(u, v + 1)
        })
        .collect();
    if eroded.is_empty() {
        return Vec::new();
    }
    pixels
        .iter()
        .copied()
        .filter(|&i| {
            if eroded.contains(&i) {
                return true;
            }
            let (u, v) = (i as usize % w, i as usize / w);
            let mut near = false;
            if u > 0 {
                near |= eroded.contains(&(i - 1));
            }
            if u + 1 < w {
                near |= eroded.contains(&(i + 1));
            }
            if v > 0 {
                near |= eroded.contains(&(i - w as u32));
            }
            if v + 1 < h {
                near |= eroded.contains(&(i + w as u32));
            }
            near
        })
        .collect()
}

/// 4-connected components over a sparse set of flat pixel indices.
fn connected_components(pixels: &[u32], w: usize, h: usize) -> Vec<Vec<u32>> {
    use std::collections::HashSet;
    let set: HashSet<u32> = pixels.iter().copied().collect();
    let mut seen: HashSet<u32> = HashSet::new();
    let mut components = Vec::new();
    let mut sorted = pixels.to_vec();
    sorted.sort_unstable();
    for &start in &sorted {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(idx) = stack.pop() {
            comp.push(idx);
            let (u, v) = ((idx as usize) % w, (idx as usize) / w);
            let mut push = |uu: usize, vv: usize| {
                let ni = (vv * w + uu) as u32;
                if set.contains(&ni) && seen.insert(ni) {
                    stack.push(ni);
                }
            };
            if u > 0 {
                push(u - 1, v);
            }
            if u + 1 < w {
                push(u + 1, v);
            }
            if v > 0 {
                push(u, v - 1);
            }
            if v + 1 < h {
                push(u, v + 1);
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// Merge regions that describe the same plane: mean normals within the merge
/// angle and plane-distance medians within twice the outlier tolerance (two
/// same-plane regions produced by separate peel rounds can sit up to one
/// band either side of the true offset). Duplicated and clipped remnants of
/// cross-view transfers collapse back into the region they belong to,
/// keeping one holistic label per physical plane.
pub fn merge_coplanar_regions(
    regions: Vec<PlaneRegion>,
    plane_dist: &ScalarMap,
    cfg: &Lp3Config,
) -> Vec<PlaneRegion> {
    let w = plane_dist.width();
    let median_of = |pixels: &[u32]| -> f64 {
        let mut ds: Vec<f64> = pixels
            .iter()
            .map(|&i| plane_dist.get(i as usize % w, i as usize / w))
            .filter(|d| d.is_finite())
            .collect();
        if ds.is_empty() {
            return f64::NAN;
        }
        ds.sort_by(f64::total_cmp);
        ds[(ds.len() - 1) / 2]
    };
    let cos_thresh = cfg.merge_angle_deg.to_radians().cos();

    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by(|&a, &b| {
        regions[b]
            .pixels
            .len()
            .cmp(&regions[a].pixels.len())
            .then(a.cmp(&b))
    });
    let mut merged: Vec<(PlaneRegion, f64)> = Vec::new();
    for idx in order {
        let r = &regions[idx];
        let m = median_of(&r.pixels);
        let slot = merged.iter_mut().find(|(c, cm)| {
            m.is_finite()
                && cm.is_finite()
                && c.mean_normal.dot(&r.mean_normal) >= cos_thresh
                && (cm - m).abs() <= 2.0 * cfg.dist_outlier_m
        });
        match slot {
            Some((c, cm)) => {
                let (na, nb) = (c.pixels.len() as f64, r.pixels.len() as f64);
                let mut n = c.mean_normal * na + r.mean_normal * nb;
                if n.norm() > 1e-12 {
                    n.normalize_mut();
                    c.mean_normal = n;
                }
                c.pixels.extend_from_slice(&r.pixels);
                c.pixels.sort_unstable();
                c.pixels.dedup();
                *cm = median_of(&c.pixels);
            }
            None => merged.push((r.clone(), m)),
        }
    }
    merged.into_iter().map(|(r, _)| r).collect()
}

/// Assemble disjoint regions into a contiguous 1..L label map. Overlaps are
/// clipped against larger regions; regions falling below `min_fragment_px`
/// after clipping are dropped.
pub fn build_label_map(
    regions: &[PlaneRegion],
    width: usize,
    height: usize,
    min_fragment_px: usize,
) -> PlaneLabelMap {
    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by(|&a, &b| {
        regions[b]
            .pixels
            .len()
            .cmp(&regions[a].pixels.len())
            .then(a.cmp(&b))
    });
    let mut grid = vec![0u32; width * height];
    let mut meta = Vec::new();
    let mut next = 1u32;
    for &ri in &order {
        let region = &regions[ri];
        let free: Vec<u32> = region
            .pixels
            .iter()
            .copied()
            .filter(|&i| grid[i as usize] == 0)
            .collect();
        if free.len() < min_fragment_px.max(1) {
            continue;
        }
        for &i in &free {
            grid[i as usize] = next;
        }
        meta.push(LabelInfo {
            id: next,
            class: region.class.clone(),
            normal: region.mean_normal.into(),
            pixel_count: free.len(),
        });
        next += 1;
    }
    PlaneLabelMap::from_parts(width, height, grid, meta)
}

/// Full single-view LP3 labeling given fused masks and prior geometry.
pub fn label_view(
    masks: &[MaskProposal],
    prior_normals: &VectorMap,
    prior_plane_dist: &ScalarMap,
    cfg: &Lp3Config,
) -> Result<PlaneLabelMap> {
    let (w, h) = (prior_normals.width(), prior_normals.height());
    let mut regions = Vec::new();
    for mask in masks {
        regions.extend(inspect_and_split(mask, prior_normals, prior_plane_dist, cfg));
    }
    let regions = merge_coplanar_regions(regions, prior_plane_dist, cfg);
    Ok(build_label_map(
        &regions,
        w,
        h,
        cfg.resolve_min_fragment_px(w, h),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{normal_from_depth, plane_distance_map, simple_camera};
    use nalgebra::Matrix3;

    fn bx(label: &str, bbox: [f64; 4]) -> BoxProposal {
        BoxProposal {
            view_id: 0,
            label: label.into(),
            score: 0.9,
            bbox,
        }
    }

    #[test]
    fn nested_same_label_removed() {
        let a = bx("wall", [0.0, 0.0, 100.0, 100.0]);
        let b = bx("wall", [10.0, 10.0, 50.0, 50.0]);
        let out = filter_nested_boxes(&[a, b], 0.95);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bbox[2], 100.0);
    }

    #[test]
    fn nested_different_label_kept() {
        let a = bx("wall", [0.0, 0.0, 100.0, 100.0]);
        let b = bx("door", [10.0, 10.0, 50.0, 50.0]);
        assert_eq!(filter_nested_boxes(&[a, b], 0.95).len(), 2);
    }

    #[test]
    fn three_mutually_nested_keep_largest() {
        let boxes = vec![
            bx("wall", [5.0, 5.0, 50.0, 50.0]),
            bx("wall", [0.0, 0.0, 100.0, 100.0]),
            bx("wall", [10.0, 10.0, 30.0, 30.0]),
        ];
        let out = filter_nested_boxes(&boxes, 0.95);
        // brute-force pairwise containment oracle
        let mut expect_removed = vec![false; 3];
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let inter = boxes[i].intersection_area(&boxes[j]);
                let smaller = boxes[i].area().min(boxes[j].area());
                if inter / smaller >= 0.95 {
                    let loser = if boxes[i].area() < boxes[j].area() { i } else { j };
                    expect_removed[loser] = true;
                }
            }
        }
        let survivors: Vec<usize> = (0..3).filter(|&i| !expect_removed[i]).collect();
        assert_eq!(survivors, vec![1]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bbox, [0.0, 0.0, 100.0, 100.0]);
    }

    #[test]
    fn fuse_identical_cameras_reproduces_mask_bbox() {
        let cam = simple_camera(60.0, 60.0, 32.0, 32.0, 64, 64);
        let mut cam1 = cam.clone();
        cam1.id = 1;
        let cams = vec![cam, cam1];
        let mut mask = BoolMap::filled(64, 64, false);
        for v in 10..30 {
            for u in 20..50 {
                mask.set(u, v, true);
            }
        }
        let masks = vec![
            vec![],
            vec![MaskProposal {
                view_id: 1,
                label: "wall".into(),
                score: 0.8,
                mask,
            }],
        ];
        let depth = ScalarMap::filled(64, 64, 2.0);
        let out = fuse_boxes_cross_view(
            &[vec![], vec![]],
            &masks,
            &[Some(depth.clone()), Some(depth)],
            &cams,
            &[vec![1], vec![]],
            &Lp3Config::default(),
        );
        assert_eq!(out.boxes[0].len(), 1);
        assert_eq!(out.boxes[0][0].bbox, [20.0, 10.0, 49.0, 29.0]);
        assert!(out.boxes[1].is_empty());
    }

    #[test]
    fn fuse_clamps_partially_out_of_frame() {
        // target rotated so part of the wall leaves the frame on the left
        let k = Matrix3::new(60.0, 0.0, 32.0, 0.0, 60.0, 32.0, 0.0, 0.0, 1.0);
        let source = CameraView::new(
            0,
            k,
            Matrix3::identity(),
            nalgebra::Vector3::zeros(),
            64,
            64,
        )
        .unwrap();
        let angle: f64 = 0.35;
        let (s, c) = angle.sin_cos();
        let rot_y = Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c);
        let target =
            CameraView::new(1, k, rot_y, nalgebra::Vector3::zeros(), 64, 64).unwrap();
        let mut mask = BoolMap::filled(64, 64, false);
        for v in 8..56 {
            for u in 4..60 {
                mask.set(u, v, true);
            }
        }
        let depth = ScalarMap::filled(64, 64, 2.0);
        let masks = vec![vec![MaskProposal {
            view_id: 0,
            label: "wall".into(),
            score: 1.0,
            mask: mask.clone(),
        }]];

        // per-pixel reprojection oracle, composed by hand
        let mut exp = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        let mut any = false;
        for v in 0..64 {
            for u in 0..64 {
                if !mask.get(u, v) {
                    continue;
                }
                let ray = source.k_inv() * nalgebra::Vector3::new(u as f64, v as f64, 1.0);
                let p_s = 2.0 * ray;
                let p_t = rot_y * p_s; // both cameras at the origin
                if p_t.z <= 0.0 {
                    continue;
                }
                let pu = (60.0 * p_t.x / p_t.z + 32.0).round();
                let pv = (60.0 * p_t.y / p_t.z + 32.0).round();
                if pu >= 0.0 && pu <= 63.0 && pv >= 0.0 && pv <= 63.0 {
                    any = true;
                    exp[0] = exp[0].min(pu);
                    exp[1] = exp[1].min(pv);
                    exp[2] = exp[2].max(pu);
                    exp[3] = exp[3].max(pv);
                }
            }
        }
        assert!(any);

        let out = fuse_boxes_cross_view(
            &[vec![], vec![]],
            &[masks[0].clone(), vec![]],
            &[Some(depth.clone()), Some(depth)],
            &[source, target],
            &[vec![], vec![0]],
            &Lp3Config::default(),
        );
        assert_eq!(out.boxes[1].len(), 1);
        assert_eq!(out.boxes[1][0].bbox, exp);
    }

    #[test]
    fn fuse_drops_plane_behind_target() {
        let k = Matrix3::new(60.0, 0.0, 32.0, 0.0, 60.0, 32.0, 0.0, 0.0, 1.0);
        let source = CameraView::new(
            0,
            k,
            Matrix3::identity(),
            nalgebra::Vector3::zeros(),
            64,
            64,
        )
        .unwrap();
        // target faces the opposite way (180 degrees about y)
        let flip = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        let target = CameraView::new(1, k, flip, nalgebra::Vector3::zeros(), 64, 64).unwrap();
        let mask = BoolMap::filled(64, 64, true);
        let depth = ScalarMap::filled(64, 64, 2.0);
        let out = fuse_boxes_cross_view(
            &[vec![], vec![]],
            &[
                vec![MaskProposal {
                    view_id: 0,
                    label: "wall".into(),
                    score: 1.0,
                    mask,
                }],
                vec![],
            ],
            &[Some(depth.clone()), Some(depth)],
            &[source, target],
            &[vec![], vec![0]],
            &Lp3Config::default(),
        );
        assert!(out.boxes[1].is_empty());
        assert!(out.transfer_masks[1].is_empty());
    }

    #[test]
    fn fuse_missing_depth_warns() {
        let cam = simple_camera(60.0, 60.0, 32.0, 32.0, 64, 64);
        let mut cam1 = cam.clone();
        cam1.id = 1;
        let out = fuse_boxes_cross_view(
            &[vec![], vec![]],
            &[
                vec![],
                vec![MaskProposal {
                    view_id: 1,
                    label: "wall".into(),
                    score: 1.0,
                    mask: BoolMap::filled(64, 64, true),
                }],
            ],
            &[None, None],
            &[cam, cam1],
            &[vec![1], vec![]],
            &Lp3Config::default(),
        );
        assert_eq!(out.warnings.len(), 1);
        assert!(out.boxes[0].is_empty());
    }

    /// fuse + filter applied twice yields the same box set.
    #[test]
    fn fusion_idempotent() {
        let cam = simple_camera(60.0, 60.0, 32.0, 32.0, 64, 64);
        let mut cam1 = cam.clone();
        cam1.id = 1;
        let cams = vec![cam, cam1];
        let mut mask = BoolMap::filled(64, 64, false);
        for v in 10..40 {
            for u in 5..60 {
                mask.set(u, v, true);
            }
        }
        let masks = vec![
            vec![MaskProposal {
                view_id: 0,
                label: "floor".into(),
                score: 1.0,
                mask: mask.clone(),
            }],
            vec![MaskProposal {
                view_id: 1,
                label: "wall".into(),
                score: 1.0,
                mask,
            }],
        ];
        let depth = ScalarMap::filled(64, 64, 2.0);
        let priors = [Some(depth.clone()), Some(depth)];
        let adjacency = [vec![1], vec![0]];
        let cfg = Lp3Config::default();

        let pass1 = fuse_boxes_cross_view(&[vec![], vec![]], &masks, &priors, &cams, &adjacency, &cfg);
        let filtered1: Vec<Vec<BoxProposal>> = pass1
            .boxes
            .iter()
            .map(|b| filter_nested_boxes(b, cfg.nested_overlap))
            .collect();
        let pass2 = fuse_boxes_cross_view(&filtered1, &masks, &priors, &cams, &adjacency, &cfg);
        let filtered2: Vec<Vec<BoxProposal>> = pass2
            .boxes
            .iter()
            .map(|b| filter_nested_boxes(b, cfg.nested_overlap))
            .collect();
        for v in 0..2 {
            assert_eq!(filtered1[v].len(), filtered2[v].len(), "view {v}");
            for (a, b) in filtered1[v].iter().zip(&filtered2[v]) {
                assert_eq!(a.bbox, b.bbox);
                assert_eq!(a.label, b.label);
            }
        }
    }

    /// Two perpendicular walls under one mask split into two pure regions.
    #[test]
    fn inspect_splits_perpendicular_walls() {
        let cam = simple_camera(40.0, 40.0, 32.0, 32.0, 64, 64);
        // left: fronto wall z = 2; right: side wall x = 0.5
        let mut gt = vec![0u8; 64 * 64];
        let depth = ScalarMap::from_fn(64, 64, |u, v| {
            let ray = cam.ray_dir(u as f64, v as f64);
            let d_side = if ray.x > 1e-6 { 0.5 / ray.x } else { f64::INFINITY };
            if d_side < 2.0 {
                gt[v * 64 + u] = 2;
                d_side
            } else {
                gt[v * 64 + u] = 1;
                2.0
            }
        });
        let normals = normal_from_depth(&depth, &cam, 1);
        let dist = plane_distance_map(&depth, &normals, &cam);
        let mask = MaskProposal {
            view_id: 0,
            label: "wall".into(),
            score: 1.0,
            mask: BoolMap::filled(64, 64, true),
        };
        let cfg = Lp3Config {
            seed: 11,
            ..Default::default()
        };
        let regions = inspect_and_split(&mask, &normals, &dist, &cfg);
        assert_eq!(regions.len(), 2, "got {} regions", regions.len());
        for region in &regions {
            let mut counts = [0usize; 3];
            for &i in &region.pixels {
                counts[gt[i as usize] as usize] += 1;
            }
            let dominant = counts.iter().max().unwrap();
            let purity = *dominant as f64 / region.pixels.len() as f64;
            assert!(purity >= 0.99, "purity {purity}");
        }
    }

    /// Two parallel walls at different distances split via plane-distance.
    #[test]
    fn inspect_splits_parallel_walls() {
        let cam = simple_camera(40.0, 40.0, 32.0, 32.0, 64, 64);
        let depth = ScalarMap::from_fn(64, 64, |u, _| if u < 32 { 2.0 } else { 4.0 });
        let normals = normal_from_depth(&depth, &cam, 1);
        let dist = plane_distance_map(&depth, &normals, &cam);
        let mask = MaskProposal {
            view_id: 0,
            label: "wall".into(),
            score: 1.0,
            mask: BoolMap::filled(64, 64, true),
        };
        let regions = inspect_and_split(&mask, &normals, &dist, &Lp3Config::default());
        assert_eq!(regions.len(), 2);
        // each region's plane distance is tight around its own median
        for region in &regions {
            let mut ds: Vec<f64> = region
                .pixels
                .iter()
                .map(|&i| dist.get((i as usize) % 64, (i as usize) / 64))
                .collect();
            ds.sort_by(f64::total_cmp);
            let med = ds[(ds.len() - 1) / 2];
            assert!(ds.iter().all(|d| (d - med).abs() <= 0.05));
        }
    }

    /// A sphere has no large planar fragments; everything is filtered out.
    #[test]
    fn inspect_sphere_yields_nothing() {
        let cam = simple_camera(60.0, 60.0, 32.0, 32.0, 64, 64);
        // desk-scale ball: distant relative to its radius, so the visible
        // normals span most of a hemisphere
        let center = Vector3::new(0.0, 0.0, 2.0);
        let r = 0.35;
        let mut mask = BoolMap::filled(64, 64, false);
        let depth = ScalarMap::from_fn(64, 64, |u, v| {
            let d = cam.ray_dir(u as f64, v as f64).normalize();
            // ray-sphere intersection from the origin
            let oc = -center;
            let b = 2.0 * oc.dot(&d);
            let c = oc.norm_squared() - r * r;
            let disc = b * b - 4.0 * c;
            if disc < 0.0 {
                return f64::NAN;
            }
            let t = (-b - disc.sqrt()) / 2.0;
            if t <= 0.0 {
                return f64::NAN;
            }
            mask.set(u, v, true);
            (t * d).z
        });
        let normals = normal_from_depth(&depth, &cam, 1);
        let dist = plane_distance_map(&depth, &normals, &cam);
        let regions = inspect_and_split(
            &MaskProposal {
                view_id: 0,
                label: "wall".into(),
                score: 1.0,
                mask,
            },
            &normals,
            &dist,
            &Lp3Config::default(),
        );
        assert!(regions.is_empty(), "got {} regions", regions.len());
    }

    #[test]
    fn inspect_empty_mask() {
        let cam = simple_camera(40.0, 40.0, 16.0, 16.0, 32, 32);
        let depth = ScalarMap::filled(32, 32, 2.0);
        let normals = normal_from_depth(&depth, &cam, 1);
        let dist = plane_distance_map(&depth, &normals, &cam);
        let regions = inspect_and_split(
            &MaskProposal {
                view_id: 0,
                label: "wall".into(),
                score: 1.0,
                mask: BoolMap::filled(32, 32, false),
            },
            &normals,
            &dist,
            &Lp3Config::default(),
        );
        assert!(regions.is_empty());
    }

    #[test]
    fn label_map_empty_and_full() {
        let empty = build_label_map(&[], 8, 8, 1);
        assert_eq!(empty.label_count(), 0);
        assert!(empty.labels().iter().all(|&l| l == 0));

        let full = PlaneRegion {
            pixels: (0..64).collect(),
            mean_normal: Vector3::new(0.0, 0.0, -1.0),
            class: "wall".into(),
        };
        let m = build_label_map(&[full], 8, 8, 1);
        assert_eq!(m.label_count(), 1);
        assert!(m.labels().iter().all(|&l| l == 1));
    }

    /// Overlap is assigned to the larger region (area-sorted clipping oracle).
    #[test]
    fn label_map_overlap_clipping() {
        let big = PlaneRegion {
            pixels: (0..48).collect(),
            mean_normal: Vector3::new(0.0, 0.0, -1.0),
            class: "wall".into(),
        };
        let small = PlaneRegion {
            pixels: (40..64).collect(),
            mean_normal: Vector3::new(0.0, 0.0, -1.0),
            class: "floor".into(),
        };
        let m = build_label_map(&[small.clone(), big.clone()], 8, 8, 1);
        // oracle: sort by size desc, first-come wins per pixel
        for i in 0..64u32 {
            let expect = if i < 48 {
                1 // big region gets label 1
            } else {
                2
            };
            assert_eq!(m.labels()[i as usize], expect, "pixel {i}");
        }
        assert_eq!(m.meta[0].class, "wall");
        assert_eq!(m.meta[1].pixel_count, 16);
    }

    #[test]
    fn label_map_contiguous_after_drop() {
        // the second region shrinks below the floor after clipping and is dropped
        let a = PlaneRegion {
            pixels: (0..60).collect(),
            mean_normal: Vector3::z(),
            class: "wall".into(),
        };
        let b = PlaneRegion {
            pixels: (55..64).collect(),
            mean_normal: Vector3::z(),
            class: "wall".into(),
        };
        let c = PlaneRegion {
            pixels: (58..64).collect(),
            mean_normal: Vector3::z(),
            class: "door".into(),
        };
        let m = build_label_map(&[a, b, c], 8, 8, 5);
        let max = *m.labels().iter().max().unwrap();
        assert_eq!(max as usize, m.label_count());
        let mut seen = vec![false; max as usize + 1];
        for &l in m.labels() {
            seen[l as usize] = true;
        }
        assert!(seen.iter().skip(1).all(|&s| s), "labels must be contiguous");
    }
}
