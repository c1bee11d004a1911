//! End-to-end pipeline integration on tiny fixtures: stage wiring, manifest
//! skipping, atomic failure behavior, and label quality on the wall fixtures.

use planesplat::config::RunConfig;
use planesplat::error::Error;
use planesplat::fixture::{generate, FixtureKind, FixtureParams, WallLayout};
use planesplat::pipeline::{self, StageOutcome};
use std::fs;
use std::path::PathBuf;

fn fresh_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("planesplat_it_{name}"));
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn tiny_params() -> FixtureParams {
    FixtureParams {
        kind: FixtureKind::BoxRoom,
        width: 48,
        height: 36,
        n_views: 5,
        noise_sigma: 0.01,
        affine_s: 1.5,
        affine_t: 0.2,
        sparse_per_view: 60,
        merged_masks: true,
        low_conf_blobs: 1,
        seed: 3,
        ..Default::default()
    }
}

fn tiny_config(dir: &PathBuf) -> RunConfig {
    let data = generate(&tiny_params()).unwrap();
    let cfg_path = pipeline::write_fixture(dir, &data).unwrap();
    let mut cfg = RunConfig::load(&cfg_path).unwrap();
    cfg.schedule.total_iters = 40;
    cfg.eval.samples_n = 3000;
    cfg.tsdf.voxel_size = 0.05;
    cfg
}

#[test]
fn full_pipeline_and_stage_skipping() {
    let dir = fresh_dir("full");
    let cfg = tiny_config(&dir);

    let report = pipeline::cmd_all(&cfg, false).unwrap().expect("metrics");
    assert!(report.cd_cm.is_finite());
    assert!(report.psnr_db > 0.0);
    for rel in ["scene.ply", "mesh.ply", "loss_log.csv", "metrics.json", "manifest.json"] {
        assert!(cfg.paths.output_dir.join(rel).exists(), "{rel} missing");
    }

    // re-running with the same config is a no-op
    assert_eq!(pipeline::cmd_align(&cfg, false).unwrap(), StageOutcome::SkippedUpToDate);
    assert_eq!(pipeline::cmd_train(&cfg, false).unwrap(), StageOutcome::SkippedUpToDate);
    // unless forced
    assert_eq!(pipeline::cmd_align(&cfg, true).unwrap(), StageOutcome::Ran);
}

#[test]
fn stage_order_violation_names_missing_artifact() {
    let dir = fresh_dir("order");
    let cfg = tiny_config(&dir);
    // train before align/lp3
    let err = pipeline::cmd_train(&cfg, false).unwrap_err();
    match err {
        Error::MissingArtifact { stage, path } => {
            assert_eq!(stage, "train");
            assert!(path.display().to_string().contains("aligned"));
        }
        other => panic!("unexpected error {other}"),
    }
    // fuse before train
    let err = pipeline::cmd_fuse(&cfg, false).unwrap_err();
    assert!(matches!(err, Error::MissingArtifact { .. }));
}

#[test]
fn corrupt_mask_fails_without_partial_outputs() {
    let dir = fresh_dir("corrupt");
    let cfg = tiny_config(&dir);
    pipeline::cmd_align(&cfg, false).unwrap();

    // corrupt one proposal mask
    let masks_dir = dir.join("proposals/masks");
    let victim = fs::read_dir(&masks_dir)
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    fs::write(&victim, b"not a png").unwrap();

    let err = pipeline::cmd_lp3(&cfg, false).unwrap_err();
    assert!(!matches!(err, Error::MissingArtifact { .. }));
    // atomic staging: no labels directory materialized
    assert!(
        !cfg.paths.output_dir.join("labels").exists()
            || fs::read_dir(cfg.paths.output_dir.join("labels"))
                .unwrap()
                .next()
                .is_none()
    );
}

#[test]
fn empty_proposals_give_all_zero_labels() {
    let dir = fresh_dir("empty_props");
    let cfg = tiny_config(&dir);
    fs::write(dir.join("proposals/boxes.json"), r#"{"boxes": []}"#).unwrap();
    fs::write(dir.join("proposals/masks_index.json"), r#"{"masks": []}"#).unwrap();

    pipeline::cmd_align(&cfg, false).unwrap();
    pipeline::cmd_lp3(&cfg, false).unwrap();
    let (labels, _, _) =
        planesplat::io::png::read_labels(&cfg.paths.output_dir.join("labels/view_000.png"))
            .unwrap();
    assert!(labels.iter().all(|&l| l == 0));
}

#[test]
fn dry_config_roundtrip() {
    let dir = fresh_dir("cfg_roundtrip");
    let cfg = tiny_config(&dir);
    let p = dir.join("copy.json");
    cfg.save(&p).unwrap();
    let r = RunConfig::load(&p).unwrap();
    assert_eq!(r.schedule.total_iters, 40);
    assert_eq!(r.lambda.p, 0.5);
    r.validate_inputs().unwrap();
}

/// Replaying the manifest's embedded config into a fresh output directory
/// reproduces byte-identical artifacts.
#[test]
fn manifest_replay_reproduces_outputs() {
    let dir = fresh_dir("replay");
    let cfg = tiny_config(&dir);
    pipeline::cmd_all(&cfg, false).unwrap();

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cfg.paths.output_dir.join("manifest.json")).unwrap())
            .unwrap();
    let mut replay_cfg: RunConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    replay_cfg.paths.output_dir = dir.join("out_replay");
    pipeline::cmd_all(&replay_cfg, false).unwrap();

    for rel in ["loss_log.csv", "mesh.ply", "scene.ply"] {
        let a = fs::read(cfg.paths.output_dir.join(rel)).unwrap();
        let b = fs::read(replay_cfg.paths.output_dir.join(rel)).unwrap();
        assert_eq!(a, b, "{rel} differs under replay");
    }
}

#[test]
fn two_walls_lp3_labels_are_pure() {
    let dir = fresh_dir("two_walls");
    let params = FixtureParams {
        kind: FixtureKind::TwoWalls,
        layout: WallLayout::Perp,
        width: 64,
        height: 48,
        n_views: 3,
        noise_sigma: 0.005,
        affine_s: 1.0,
        affine_t: 0.0,
        merged_masks: true,
        ..Default::default()
    };
    let data = generate(&params).unwrap();
    let cfg_path = pipeline::write_fixture(&dir, &data).unwrap();
    let cfg = RunConfig::load(&cfg_path).unwrap();
    pipeline::cmd_align(&cfg, false).unwrap();
    pipeline::cmd_lp3(&cfg, false).unwrap();

    let map = pipeline::read_label_map(
        &cfg.paths.output_dir.join("labels/view_001.png"),
        &cfg.paths.output_dir.join("labels/view_001.json"),
    )
    .unwrap();
    assert_eq!(map.label_count(), 2, "expected exactly two wall labels");
    let gt = &data.gt_face_ids[1];
    for info in &map.meta {
        let pixels = map.pixels_of(info.id);
        let mut counts = std::collections::HashMap::new();
        for &i in &pixels {
            *counts.entry(gt[i as usize]).or_insert(0usize) += 1;
        }
        let dominant = counts.values().max().copied().unwrap_or(0);
        let purity = dominant as f64 / pixels.len() as f64;
        assert!(purity >= 0.99, "label {} purity {purity}", info.id);
    }
}
