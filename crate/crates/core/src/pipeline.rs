//! Stage orchestration. Every stage communicates through files plus a run
//! manifest; a stage whose config is unchanged is skipped unless forced, and
//! outputs are staged in a temp directory and renamed into place so failures
//! leave no partial files.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fixture::FixtureData;
use crate::fusion::{marching_cubes, TsdfVolume};
use crate::geometry::{normal_from_depth, plane_distance_map, CameraView};
use crate::io::{cameras, pfm, ply, png};
use crate::loss::{LossWeights, ViewData};
use crate::lp3::{self, BoxProposal, LabelInfo, MaskProposal, PlaneLabelMap};
use crate::metrics::{self, MetricsReport};
use crate::optim::{self, TrainConfig};
use crate::priors::{self, AlignmentParams, SparseDepth};
use crate::raster::{ScalarMap, VectorMap};
use crate::render::render;
use crate::splat::{GaussianScene, InitView};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub config: RunConfig,
    pub lambda: LossWeights,
    pub seed: u64,
    pub prompts: Vec<String>,
    pub stages: BTreeMap<String, StageRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub completed: bool,
    pub config_hash: String,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub info: serde_json::Value,
}

impl Manifest {
    fn path(cfg: &RunConfig) -> PathBuf {
        cfg.paths.output_dir.join("manifest.json")
    }

    pub fn load_or_new(cfg: &RunConfig) -> Result<Self> {
        let p = Self::path(cfg);
        if p.exists() {
            let text = fs::read_to_string(&p)?;
            Ok(serde_json::from_str(&text)?)
        } else {
            Ok(Self {
                version: MANIFEST_VERSION,
                config: cfg.clone(),
                lambda: cfg.lambda,
                seed: cfg.seed,
                prompts: cfg.prompts.clone(),
                stages: BTreeMap::new(),
            })
        }
    }

    pub fn save(&self, cfg: &RunConfig) -> Result<()> {
        fs::create_dir_all(&cfg.paths.output_dir)?;
        let p = Self::path(cfg);
        let tmp = p.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        fs::rename(&tmp, &p)?;
        Ok(())
    }
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let json = serde_json::to_string(cfg).unwrap_or_default();
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    format!("{:x}", hasher.finalize())
}

#[derive(Debug, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    SkippedUpToDate,
}

/// Staged output writer: files accumulate under a temp directory and move
/// into place only on commit.
struct StageWriter {
    tmp: PathBuf,
    moves: Vec<(PathBuf, PathBuf)>,
    outputs: Vec<String>,
}

impl StageWriter {
    fn new(out_dir: &Path, stage: &str) -> Result<Self> {
        let tmp = out_dir.join(format!(".tmp-{stage}"));
        if tmp.exists() {
            fs::remove_dir_all(&tmp)?;
        }
        fs::create_dir_all(&tmp)?;
        Ok(Self {
            tmp,
            moves: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// Reserve a staged path that will be renamed to `final_rel` (relative to
    /// the output dir) on commit.
    fn stage_path(&mut self, out_dir: &Path, final_rel: &str) -> Result<PathBuf> {
        let staged = self.tmp.join(final_rel.replace('/', "_"));
        let target = out_dir.join(final_rel);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent)?;
        }
        self.moves.push((staged.clone(), target));
        self.outputs.push(final_rel.to_string());
        Ok(staged)
    }

    fn commit(self) -> Result<Vec<String>> {
        for (from, to) in &self.moves {
            fs::rename(from, to)?;
        }
        fs::remove_dir_all(&self.tmp).ok();
        Ok(self.outputs)
    }
}

fn view_stem(id: u32) -> String {
    format!("view_{id:03}")
}

fn should_skip(manifest: &Manifest, cfg: &RunConfig, stage: &str, force: bool) -> bool {
    if force {
        return false;
    }
    manifest
        .stages
        .get(stage)
        .map(|r| r.completed && r.config_hash == config_hash(cfg))
        .unwrap_or(false)
}

fn record_stage(
    manifest: &mut Manifest,
    cfg: &RunConfig,
    stage: &str,
    outputs: Vec<String>,
    info: serde_json::Value,
) -> Result<()> {
    manifest.stages.insert(
        stage.to_string(),
        StageRecord {
            completed: true,
            config_hash: config_hash(cfg),
            outputs,
            info,
        },
    );
    manifest.save(cfg)
}

fn require(stage: &str, path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            stage: stage.to_string(),
            path: path.to_path_buf(),
        })
    }
}

// ---------------------------------------------------------------------------
// input loading

#[derive(Serialize, Deserialize)]
struct BoxesFile {
    boxes: Vec<BoxProposal>,
}

#[derive(Serialize, Deserialize)]
struct MaskIndexEntry {
    view_id: u32,
    label: String,
    score: f64,
    path: String,
}

#[derive(Serialize, Deserialize)]
struct MaskIndexFile {
    masks: Vec<MaskIndexEntry>,
}

#[derive(Serialize, Deserialize)]
struct AdjacencyFile {
    views: Vec<AdjacencyEntry>,
}

#[derive(Serialize, Deserialize)]
struct AdjacencyEntry {
    id: u32,
    neighbors: Vec<u32>,
}

fn load_cams(cfg: &RunConfig) -> Result<Vec<CameraView>> {
    let mut cams = cameras::read_cameras(&cfg.paths.cameras)?;
    cams.sort_by_key(|c| c.id);
    Ok(cams)
}

fn load_sparse(cfg: &RunConfig, cams: &[CameraView]) -> Result<Vec<SparseDepth>> {
    cams.iter()
        .map(|c| {
            let p = cfg.paths.sparse_dir.join(format!("{}.json", view_stem(c.id)));
            let text = fs::read_to_string(&p).map_err(|_| Error::MissingArtifact {
                stage: "align".into(),
                path: p.clone(),
            })?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}

fn load_prior_depth(cfg: &RunConfig, cam: &CameraView) -> Result<ScalarMap> {
    let p = cfg
        .paths
        .prior_depth_dir
        .join(format!("{}.pfm", view_stem(cam.id)));
    require("align", &p)?;
    Ok(pfm::read_scalar(&p)?.resize_bilinear(cam.width, cam.height))
}

fn load_confidence(cfg: &RunConfig, cam: &CameraView) -> Result<ScalarMap> {
    let p = cfg
        .paths
        .confidence_dir
        .join(format!("{}.pfm", view_stem(cam.id)));
    require("align", &p)?;
    Ok(pfm::read_scalar(&p)?.resize_nearest(cam.width, cam.height))
}

fn load_image(cfg: &RunConfig, cam: &CameraView) -> Result<VectorMap> {
    let p = cfg
        .paths
        .images_dir
        .join(format!("{}.png", view_stem(cam.id)));
    require("align", &p)?;
    png::read_rgb(&p)
}

fn aligned_path(cfg: &RunConfig, id: u32) -> PathBuf {
    cfg.paths
        .output_dir
        .join("aligned")
        .join(format!("{}.pfm", view_stem(id)))
}

fn lt_mask_path(cfg: &RunConfig, id: u32) -> PathBuf {
    cfg.paths
        .output_dir
        .join("masks")
        .join(format!("lt_{}.png", view_stem(id)))
}

fn conf_mask_path(cfg: &RunConfig, id: u32) -> PathBuf {
    cfg.paths
        .output_dir
        .join("masks")
        .join(format!("conf_{}.png", view_stem(id)))
}

fn labels_png_path(cfg: &RunConfig, id: u32) -> PathBuf {
    cfg.paths
        .output_dir
        .join("labels")
        .join(format!("{}.png", view_stem(id)))
}

fn labels_meta_path(cfg: &RunConfig, id: u32) -> PathBuf {
    cfg.paths
        .output_dir
        .join("labels")
        .join(format!("{}.json", view_stem(id)))
}

fn scene_path(cfg: &RunConfig) -> PathBuf {
    cfg.paths.output_dir.join("scene.ply")
}

fn mesh_path(cfg: &RunConfig) -> PathBuf {
    cfg.paths.output_dir.join("mesh.ply")
}

pub fn read_label_map(png_path: &Path, meta_path: &Path) -> Result<PlaneLabelMap> {
    let (labels, w, h) = png::read_labels(png_path)?;
    let meta: Vec<LabelInfo> = serde_json::from_str(&fs::read_to_string(meta_path)?)?;
    Ok(PlaneLabelMap::from_parts(w, h, labels, meta))
}

// ---------------------------------------------------------------------------
// align

pub fn cmd_align(cfg: &RunConfig, force: bool) -> Result<StageOutcome> {
    cfg.validate_inputs()?;
    let mut manifest = Manifest::load_or_new(cfg)?;
    if should_skip(&manifest, cfg, "align", force) {
        return Ok(StageOutcome::SkippedUpToDate);
    }
    let cams = load_cams(cfg)?;
    let sparse = load_sparse(cfg, &cams)?;
    let dense: Vec<ScalarMap> = cams
        .iter()
        .map(|c| load_prior_depth(cfg, c))
        .collect::<Result<_>>()?;

    let mut writer = StageWriter::new(&cfg.paths.output_dir, "align")?;
    let mut params_out: Vec<AlignmentParams> = Vec::new();
    let group = cfg.priors.group_size.max(1);
    for (gi, chunk) in (0..cams.len()).collect::<Vec<_>>().chunks(group).enumerate() {
        let d_refs: Vec<&ScalarMap> = chunk.iter().map(|&i| &dense[i]).collect();
        let s_refs: Vec<&SparseDepth> = chunk.iter().map(|&i| &sparse[i]).collect();
        let params =
            priors::align_scale_shift(&d_refs, &s_refs, cfg.priors.irls_iters, gi as u32)?;
        for &i in chunk {
            let aligned = priors::apply_alignment(&dense[i], &params);
            let rel = format!("aligned/{}.pfm", view_stem(cams[i].id));
            pfm::write_scalar(&writer.stage_path(&cfg.paths.output_dir, &rel)?, &aligned)?;
        }
        params_out.push(params);
    }

    for cam in &cams {
        let image = load_image(cfg, cam)?;
        let lt = priors::low_texture_mask(&image, &cfg.priors);
        let rel = format!("masks/lt_{}.png", view_stem(cam.id));
        png::write_mask(&writer.stage_path(&cfg.paths.output_dir, &rel)?, &lt)?;

        let conf = load_confidence(cfg, cam)?;
        let conf_mask = priors::confidence_mask(&conf, cfg.priors.conf_threshold);
        let rel = format!("masks/conf_{}.png", view_stem(cam.id));
        png::write_mask(&writer.stage_path(&cfg.paths.output_dir, &rel)?, &conf_mask)?;
    }

    let outputs = writer.commit()?;
    record_stage(
        &mut manifest,
        cfg,
        "align",
        outputs,
        serde_json::json!({ "alignment": params_out }),
    )?;
    Ok(StageOutcome::Ran)
}

// ---------------------------------------------------------------------------
// lp3

pub fn cmd_lp3(cfg: &RunConfig, force: bool) -> Result<StageOutcome> {
    cfg.validate_inputs()?;
    let mut manifest = Manifest::load_or_new(cfg)?;
    if should_skip(&manifest, cfg, "lp3", force) {
        return Ok(StageOutcome::SkippedUpToDate);
    }
    let cams = load_cams(cfg)?;
    for cam in &cams {
        require("lp3", &aligned_path(cfg, cam.id))?;
    }

    // proposals
    let boxes_file: BoxesFile = serde_json::from_str(&fs::read_to_string(&cfg.paths.boxes)?)?;
    let mask_index: MaskIndexFile =
        serde_json::from_str(&fs::read_to_string(&cfg.paths.masks_index)?)?;
    let adjacency_file: AdjacencyFile =
        serde_json::from_str(&fs::read_to_string(&cfg.paths.adjacency)?)?;

    let id_to_idx: BTreeMap<u32, usize> = cams.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
    let mut boxes: Vec<Vec<BoxProposal>> = vec![Vec::new(); cams.len()];
    for mut b in boxes_file.boxes {
        if let Some(&i) = id_to_idx.get(&b.view_id) {
            b.clamp_to(cams[i].width, cams[i].height);
            boxes[i].push(b);
        }
    }
    let masks_dir = cfg.paths.masks_index.parent().unwrap_or(Path::new("."));
    let mut masks: Vec<Vec<MaskProposal>> = vec![Vec::new(); cams.len()];
    for entry in mask_index.masks {
        if let Some(&i) = id_to_idx.get(&entry.view_id) {
            let mask = png::read_mask(&masks_dir.join(&entry.path))?;
            masks[i].push(MaskProposal {
                view_id: entry.view_id,
                label: entry.label,
                score: entry.score,
                mask,
            });
        }
    }
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); cams.len()];
    for e in adjacency_file.views {
        if let Some(&i) = id_to_idx.get(&e.id) {
            adjacency[i] = e
                .neighbors
                .iter()
                .filter_map(|n| id_to_idx.get(n).copied())
                .collect();
        }
    }

    let aligned: Vec<Option<ScalarMap>> = cams
        .iter()
        .map(|c| pfm::read_scalar(&aligned_path(cfg, c.id)).map(Some))
        .collect::<Result<_>>()?;

    let fused = lp3::fuse_boxes_cross_view(&boxes, &masks, &aligned, &cams, &adjacency, &cfg.lp3);
    let mut writer = StageWriter::new(&cfg.paths.output_dir, "lp3")?;
    let mut label_counts = Vec::new();
    for (i, cam) in cams.iter().enumerate() {
        let filtered = lp3::filter_nested_boxes(&fused.boxes[i], cfg.lp3.nested_overlap);
        let _ = filtered; // box set retained in the manifest info below
        let depth = aligned[i].as_ref().unwrap();
        let normals = normal_from_depth(depth, cam, cfg.lp3.normal_offset_px);
        let dist = plane_distance_map(depth, &normals, cam);
        let mut regions = Vec::new();
        for mask in masks[i].iter().chain(&fused.transfer_masks[i]) {
            regions.extend(lp3::inspect_and_split(mask, &normals, &dist, &cfg.lp3));
        }
        let regions = lp3::merge_coplanar_regions(regions, &dist, &cfg.lp3);
        // region normals world-frame for the metadata
        let mut regions = regions;
        for r in regions.iter_mut() {
            r.mean_normal = cam.r().transpose() * r.mean_normal;
        }
        let map = lp3::build_label_map(
            &regions,
            cam.width,
            cam.height,
            cfg.lp3.resolve_min_fragment_px(cam.width, cam.height),
        );
        label_counts.push(map.label_count());
        let rel = format!("labels/{}.png", view_stem(cam.id));
        png::write_labels(
            &writer.stage_path(&cfg.paths.output_dir, &rel)?,
            map.labels(),
            cam.width,
            cam.height,
        )?;
        let rel = format!("labels/{}.json", view_stem(cam.id));
        fs::write(
            writer.stage_path(&cfg.paths.output_dir, &rel)?,
            serde_json::to_string_pretty(&map.meta)?,
        )?;
    }
    let outputs = writer.commit()?;
    record_stage(
        &mut manifest,
        cfg,
        "lp3",
        outputs,
        serde_json::json!({
            "label_counts": label_counts,
            "warnings": fused.warnings,
            "lp3_config": cfg.lp3,
        }),
    )?;
    Ok(StageOutcome::Ran)
}

// ---------------------------------------------------------------------------
// train

fn load_view_data(cfg: &RunConfig, cams: &[CameraView]) -> Result<Vec<ViewData>> {
    cams.iter()
        .map(|cam| {
            require("train", &aligned_path(cfg, cam.id))?;
            require("train", &labels_png_path(cfg, cam.id))?;
            let prior_depth = pfm::read_scalar(&aligned_path(cfg, cam.id))?;
            let prior_normals = normal_from_depth(&prior_depth, cam, cfg.lp3.normal_offset_px);
            Ok(ViewData {
                cam: cam.clone(),
                target_rgb: load_image(cfg, cam)?,
                labels: read_label_map(&labels_png_path(cfg, cam.id), &labels_meta_path(cfg, cam.id))?,
                prior_depth,
                prior_normals,
                lt: png::read_mask(&lt_mask_path(cfg, cam.id))?,
                conf: png::read_mask(&conf_mask_path(cfg, cam.id))?,
            })
        })
        .collect()
}

pub fn cmd_train(cfg: &RunConfig, force: bool) -> Result<StageOutcome> {
    cfg.validate_inputs()?;
    let mut manifest = Manifest::load_or_new(cfg)?;
    if should_skip(&manifest, cfg, "train", force) {
        return Ok(StageOutcome::SkippedUpToDate);
    }
    let cams = load_cams(cfg)?;
    let views = load_view_data(cfg, &cams)?;
    let sparse = load_sparse(cfg, &cams)?;

    // SfM-style initialization from sparse depth samples
    let mut points = Vec::new();
    let mut colors = Vec::new();
    for (view, sd) in views.iter().zip(&sparse) {
        for s in &sd.samples {
            if s.depth_m <= 0.0 {
                continue;
            }
            let p_cam = crate::geometry::back_project_value(s.depth_m, &view.cam, s.u, s.v);
            points.push(view.cam.cam_to_world(&p_cam));
            let (u, v) = (
                (s.u.round() as usize).min(view.cam.width - 1),
                (s.v.round() as usize).min(view.cam.height - 1),
            );
            colors.push(view.target_rgb.get(u, v));
        }
    }
    let mut scene = GaussianScene::from_points(&points, &colors, cfg.init.opacity_init);
    let n_sfm = scene.len();

    let init_views: Vec<InitView> = views
        .iter()
        .map(|v| InitView {
            cam: &v.cam,
            labels: &v.labels,
            prior_depth: &v.prior_depth,
            rgb: &v.target_rgb,
        })
        .collect();
    let added = crate::splat::plane_guided_init(&mut scene, &init_views, &cfg.init, cfg.seed)?;

    let schedule = cfg.schedule.resolve()?;
    let train_cfg = TrainConfig {
        schedule,
        weights: cfg.lambda,
        seed: cfg.seed,
    };
    let out_dir = cfg.paths.output_dir.clone();
    fs::create_dir_all(&out_dir)?;
    let dump_dir = out_dir.join("diagnostics");
    let log = optim::train(
        &mut scene,
        &views,
        &train_cfg,
        Some(&dump_dir),
        |iter, scene| {
            if iter < train_cfg.schedule.total_iters {
                let p = out_dir.join(format!("ckpt_{iter:06}.ply"));
                ply::write_splats(&p, scene)?;
            }
            Ok(())
        },
    )?;

    let mut writer = StageWriter::new(&cfg.paths.output_dir, "train")?;
    ply::write_splats(&writer.stage_path(&cfg.paths.output_dir, "scene.ply")?, &scene)?;
    fs::write(
        writer.stage_path(&cfg.paths.output_dir, "loss_log.csv")?,
        optim::loss_log_csv(&log),
    )?;
    let outputs = writer.commit()?;
    record_stage(
        &mut manifest,
        cfg,
        "train",
        outputs,
        serde_json::json!({
            "gaussians_sfm": n_sfm,
            "gaussians_added": added,
            "gaussians_final": scene.len(),
            "iterations": log.len(),
        }),
    )?;
    Ok(StageOutcome::Ran)
}

// ---------------------------------------------------------------------------
// fuse

pub fn cmd_fuse(cfg: &RunConfig, force: bool) -> Result<StageOutcome> {
    let mut manifest = Manifest::load_or_new(cfg)?;
    if should_skip(&manifest, cfg, "fuse", force) {
        return Ok(StageOutcome::SkippedUpToDate);
    }
    require("fuse", &scene_path(cfg))?;
    let scene = ply::read_splats(&scene_path(cfg))?;
    let cams = load_cams(cfg)?;

    let (lo, hi) = match (cfg.tsdf.bounds_lo, cfg.tsdf.bounds_hi) {
        (Some(lo), Some(hi)) => (Vector3::from(lo), Vector3::from(hi)),
        _ => scene_bounds(&scene),
    };
    let trunc = cfg.tsdf.trunc_factor * cfg.tsdf.voxel_size;
    let mut vol = TsdfVolume::for_bounds(lo, hi, cfg.tsdf.voxel_size, trunc);
    for cam in &cams {
        let out = render(&scene, cam);
        vol.integrate(&out.depth, Some(&out.color), cam, cfg.tsdf.depth_max);
    }
    let mesh = marching_cubes(&vol);

    let mut writer = StageWriter::new(&cfg.paths.output_dir, "fuse")?;
    ply::write_mesh(&writer.stage_path(&cfg.paths.output_dir, "mesh.ply")?, &mesh)?;
    let outputs = writer.commit()?;
    record_stage(
        &mut manifest,
        cfg,
        "fuse",
        outputs,
        serde_json::json!({
            "vertices": mesh.vertices.len(),
            "triangles": mesh.triangles.len(),
            "voxel_size": cfg.tsdf.voxel_size,
        }),
    )?;
    Ok(StageOutcome::Ran)
}

fn scene_bounds(scene: &GaussianScene) -> (Vector3<f64>, Vector3<f64>) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in &scene.mu {
        for c in 0..3 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    (lo, hi)
}

// ---------------------------------------------------------------------------
// eval

pub fn cmd_eval(cfg: &RunConfig, force: bool) -> Result<Option<MetricsReport>> {
    let mut manifest = Manifest::load_or_new(cfg)?;
    if should_skip(&manifest, cfg, "eval", force) {
        return Ok(None);
    }
    require("eval", &mesh_path(cfg))?;
    require("eval", &scene_path(cfg))?;
    let gt_path = cfg.paths.gt_mesh.as_ref().ok_or_else(|| {
        Error::InvalidConfig("eval requires paths.gt_mesh for surface metrics".into())
    })?;
    require("eval", gt_path)?;

    let pred = ply::read_mesh(&mesh_path(cfg))?;
    let gt = ply::read_mesh(gt_path)?;
    let surface = metrics::surface_metrics(
        &pred,
        &gt,
        cfg.eval.samples_n,
        cfg.eval.f1_thresh_cm / 100.0,
        cfg.eval.seed,
    )?;

    let scene = ply::read_splats(&scene_path(cfg))?;
    let cams = load_cams(cfg)?;
    let mut psnr_sum = 0.0;
    let mut ssim_sum = 0.0;
    let mut writer = StageWriter::new(&cfg.paths.output_dir, "eval")?;
    let mut heatmap_rels = Vec::new();
    for cam in &cams {
        let target = load_image(cfg, cam)?;
        let out = render(&scene, cam);
        let (psnr, ssim) = metrics::image_metrics(&out.color, &target);
        psnr_sum += psnr;
        ssim_sum += ssim;
        if cfg.eval.heatmaps {
            let err = ScalarMap::from_fn(cam.width, cam.height, |u, v| {
                (out.color.get(u, v) - target.get(u, v)).norm() / 3f64.sqrt()
            });
            let rel = format!("heatmaps/{}.png", view_stem(cam.id));
            png::write_gray(&writer.stage_path(&cfg.paths.output_dir, &rel)?, &err)?;
            heatmap_rels.push(rel);
        }
    }
    let n = cams.len() as f64;
    let report = metrics::build_report(&surface, psnr_sum / n, ssim_sum / n);
    fs::write(
        writer.stage_path(&cfg.paths.output_dir, "metrics.json")?,
        serde_json::to_string_pretty(&report)?,
    )?;
    let outputs = writer.commit()?;
    record_stage(
        &mut manifest,
        cfg,
        "eval",
        outputs,
        serde_json::to_value(&report)?,
    )?;
    Ok(Some(report))
}

/// Canonical stage order. Alignment runs first: the label pipeline inspects
/// geometry derived from the aligned metric depth.
pub fn cmd_all(cfg: &RunConfig, force: bool) -> Result<Option<MetricsReport>> {
    cmd_align(cfg, force)?;
    cmd_lp3(cfg, force)?;
    cmd_train(cfg, force)?;
    cmd_fuse(cfg, force)?;
    cmd_eval(cfg, force)
}

// ---------------------------------------------------------------------------
// fixture writing

/// Materialize a generated fixture as pipeline inputs plus a ready-to-run
/// config. Returns the config path.
pub fn write_fixture(dir: &Path, data: &FixtureData) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    for sub in [
        "images",
        "prior_depth",
        "confidence",
        "sparse",
        "proposals/masks",
        "gt_depth",
        "gt_labels",
    ] {
        fs::create_dir_all(dir.join(sub))?;
    }
    cameras::write_cameras(&dir.join("cameras.json"), &data.cams)?;

    let mut mask_entries = Vec::new();
    let mut all_boxes = Vec::new();
    for (i, cam) in data.cams.iter().enumerate() {
        let stem = view_stem(cam.id);
        png::write_rgb(&dir.join("images").join(format!("{stem}.png")), &data.images[i])?;
        pfm::write_scalar(
            &dir.join("prior_depth").join(format!("{stem}.pfm")),
            &data.prior_depth[i],
        )?;
        pfm::write_scalar(
            &dir.join("gt_depth").join(format!("{stem}.pfm")),
            &data.gt_depth[i],
        )?;
        pfm::write_scalar(
            &dir.join("confidence").join(format!("{stem}.pfm")),
            &data.confidence[i],
        )?;
        fs::write(
            dir.join("sparse").join(format!("{stem}.json")),
            serde_json::to_string(&data.sparse[i])?,
        )?;
        png::write_labels(
            &dir.join("gt_labels").join(format!("{stem}.png")),
            &data.gt_face_ids[i],
            cam.width,
            cam.height,
        )?;
        for (k, m) in data.masks[i].iter().enumerate() {
            let rel = format!("masks/{stem}_m{k}.png");
            png::write_mask(&dir.join("proposals").join(&rel), &m.mask)?;
            mask_entries.push(MaskIndexEntry {
                view_id: cam.id,
                label: m.label.clone(),
                score: m.score,
                path: rel,
            });
        }
        all_boxes.extend(data.boxes[i].iter().cloned());
    }
    fs::write(
        dir.join("proposals/boxes.json"),
        serde_json::to_string_pretty(&BoxesFile { boxes: all_boxes })?,
    )?;
    fs::write(
        dir.join("proposals/masks_index.json"),
        serde_json::to_string_pretty(&MaskIndexFile {
            masks: mask_entries,
        })?,
    )?;
    let adjacency = AdjacencyFile {
        views: data
            .adjacency
            .iter()
            .enumerate()
            .map(|(i, nb)| AdjacencyEntry {
                id: data.cams[i].id,
                neighbors: nb.iter().map(|&j| data.cams[j].id).collect(),
            })
            .collect(),
    };
    fs::write(
        dir.join("adjacency.json"),
        serde_json::to_string_pretty(&adjacency)?,
    )?;
    ply::write_mesh(&dir.join("gt_mesh.ply"), &data.gt_mesh)?;

    let cfg = fixture_run_config(dir, data);
    let cfg_path = dir.join("run_config.json");
    cfg.save(&cfg_path)?;
    Ok(cfg_path)
}

/// Desk-scale defaults wired to the fixture's files.
pub fn fixture_run_config(dir: &Path, data: &FixtureData) -> RunConfig {
    let mut cfg = RunConfig {
        paths: crate::config::PathsConfig {
            cameras: dir.join("cameras.json"),
            images_dir: dir.join("images"),
            prior_depth_dir: dir.join("prior_depth"),
            confidence_dir: dir.join("confidence"),
            sparse_dir: dir.join("sparse"),
            boxes: dir.join("proposals/boxes.json"),
            masks_index: dir.join("proposals/masks_index.json"),
            adjacency: dir.join("adjacency.json"),
            gt_mesh: Some(dir.join("gt_mesh.ply")),
            output_dir: dir.join("out"),
        },
        lp3: Default::default(),
        priors: Default::default(),
        init: Default::default(),
        schedule: crate::config::ScheduleConfig {
            total_iters: 3000,
            ..Default::default()
        },
        lambda: LossWeights::default(),
        tsdf: Default::default(),
        eval: Default::default(),
        seed: data.params.seed,
        prompts: vec![
            "wall".into(),
            "floor".into(),
            "door".into(),
            "screen".into(),
            "window".into(),
            "ceiling".into(),
            "table".into(),
        ],
    };
    cfg.init.density_thresh = 0.2;
    cfg.init.samples_per_px = 1.0;
    let margin = 0.1;
    cfg.tsdf.bounds_lo = Some([
        data.bounds.0.x - margin,
        data.bounds.0.y - margin,
        data.bounds.0.z - margin,
    ]);
    cfg.tsdf.bounds_hi = Some([
        data.bounds.1.x + margin,
        data.bounds.1.y + margin,
        data.bounds.1.z + margin,
    ]);
    cfg.tsdf.depth_max = (data.bounds.1 - data.bounds.0).norm();
    cfg
}
