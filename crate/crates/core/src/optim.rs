//! Training loop: epoch-shuffled view selection, schedule-gated loss terms,
//! Adam updates per parameter group, quaternion re-normalization and
//! checkpointing. Fully deterministic under a fixed seed.

use crate::error::{Error, Result};
use crate::io::pfm;
use crate::loss::{self, ActiveTerms, LossWeights, ViewData};
use crate::render::{render, render_backward, SceneGrads};
use crate::splat::GaussianScene;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Log-scale clamp window keeping `exp` finite over long flattening runs.
const LOG_SCALE_MIN: f64 = -13.8; // ~1e-6 m
const LOG_SCALE_MAX: f64 = 3.4; // ~30 m

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schedule {
    pub total_iters: usize,
    pub start_dn: usize,
    pub start_p: usize,
    pub start_rd: usize,
    pub start_rn: usize,
    pub lr_mu: f64,
    pub lr_mu_final: f64,
    pub lr_log_scale: f64,
    pub lr_rot: f64,
    pub lr_opacity: f64,
    pub lr_rgb: f64,
    /// Checkpoint every N iterations (0 = final only).
    pub ckpt_every: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self::with_total(30000)
    }
}

impl Schedule {
    /// Schedule with the reference start ratios 7/30, 14/30 and 20/30
    /// applied to an arbitrary iteration budget.
    pub fn with_total(total_iters: usize) -> Self {
        let scale = |n: usize| (total_iters as f64 * n as f64 / 30000.0).round() as usize;
        Self {
            total_iters,
            start_dn: scale(7000),
            start_p: scale(14000),
            start_rd: scale(7000),
            start_rn: scale(20000),
            lr_mu: 1.6e-4,
            lr_mu_final: 1.6e-6,
            lr_log_scale: 5e-3,
            lr_rot: 1e-3,
            lr_opacity: 5e-2,
            lr_rgb: 2.5e-3,
            ckpt_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("start_dn", self.start_dn),
            ("start_p", self.start_p),
            ("start_rd", self.start_rd),
            ("start_rn", self.start_rn),
        ] {
            if s > self.total_iters {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {s} exceeds total_iters = {}",
                    self.total_iters
                )));
            }
        }
        Ok(())
    }

    pub fn active(&self, iteration: usize) -> ActiveTerms {
        ActiveTerms {
            dn: iteration >= self.start_dn,
            p: iteration >= self.start_p,
            rd: iteration >= self.start_rd,
            rn: iteration >= self.start_rn,
        }
    }

    /// Exponentially decayed center learning rate.
    pub fn lr_mu_at(&self, iteration: usize) -> f64 {
        if self.total_iters <= 1 {
            return self.lr_mu;
        }
        let t = iteration as f64 / self.total_iters as f64;
        self.lr_mu * (self.lr_mu_final / self.lr_mu).powf(t)
    }
}

/// Epoch-based view selection: each epoch is a fresh seeded permutation, so
/// every view is visited exactly once per `num_views` iterations.
pub fn select_view(iteration: usize, num_views: usize, seed: u64) -> usize {
    assert!(num_views > 0);
    if num_views == 1 {
        return 0;
    }
    let epoch = (iteration / num_views) as u64;
    let pos = iteration % num_views;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_mul(0x9E3779B97F4A7C15));
    let mut perm: Vec<usize> = (0..num_views).collect();
    for k in (1..num_views).rev() {
        let j = rng.random_range(0..=k);
        perm.swap(k, j);
    }
    perm[pos]
}

/// One CSV row per iteration. Weight columns carry the effective weight
/// (zero before the term's schedule start).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub view_id: u32,
    pub l_rgb: f64,
    pub l_s: f64,
    pub l_dn: f64,
    pub l_p: f64,
    pub l_rd: f64,
    pub l_rn: f64,
    pub w_dn: f64,
    pub w_p: f64,
    pub w_rd: f64,
    pub w_rn: f64,
    pub total: f64,
    pub px_p: usize,
    pub px_rd: usize,
    pub px_rn: usize,
    pub px_dn: usize,
    pub num_gaussians: usize,
}

struct Adam {
    m: SceneGrads,
    v: SceneGrads,
    t: usize,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: SceneGrads::zeros(n),
            v: SceneGrads::zeros(n),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    fn step(&mut self, scene: &mut GaussianScene, g: &SceneGrads, lrs: &GroupLrs) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let upd = |m: &mut f64, v: &mut f64, g: f64, theta: &mut f64, lr: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *theta -= lr * mh / (vh.sqrt() + eps);
        };
        for i in 0..scene.len() {
            for c in 0..3 {
                upd(
                    &mut self.m.mu[i][c],
                    &mut self.v.mu[i][c],
                    g.mu[i][c],
                    &mut scene.mu[i][c],
                    lrs.mu,
                );
                upd(
                    &mut self.m.log_scale[i][c],
                    &mut self.v.log_scale[i][c],
                    g.log_scale[i][c],
                    &mut scene.log_scale[i][c],
                    lrs.log_scale,
                );
                upd(
                    &mut self.m.rgb[i][c],
                    &mut self.v.rgb[i][c],
                    g.rgb[i][c],
                    &mut scene.rgb[i][c],
                    lrs.rgb,
                );
            }
            for c in 0..4 {
                upd(
                    &mut self.m.rot[i][c],
                    &mut self.v.rot[i][c],
                    g.rot[i][c],
                    &mut scene.rot[i][c],
                    lrs.rot,
                );
            }
            upd(
                &mut self.m.opacity_logit[i],
                &mut self.v.opacity_logit[i],
                g.opacity_logit[i],
                &mut scene.opacity_logit[i],
                lrs.opacity,
            );
        }
    }
}

struct GroupLrs {
    mu: f64,
    log_scale: f64,
    rot: f64,
    opacity: f64,
    rgb: f64,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub schedule: Schedule,
    pub weights: LossWeights,
    pub seed: u64,
}

/// Optimize the scene against the views. `on_checkpoint` fires every
/// `ckpt_every` iterations and once at the end. A non-finite total loss
/// aborts after dumping the offending view's rasters to `dump_dir`.
pub fn train(
    scene: &mut GaussianScene,
    views: &[ViewData],
    cfg: &TrainConfig,
    dump_dir: Option<&Path>,
    mut on_checkpoint: impl FnMut(usize, &GaussianScene) -> Result<()>,
) -> Result<Vec<LossRecord>> {
    if views.is_empty() {
        return Err(Error::EmptyInput("no training views"));
    }
    cfg.schedule.validate()?;
    let mut adam = Adam::new(scene.len());
    let mut log = Vec::with_capacity(cfg.schedule.total_iters);

    for iteration in 0..cfg.schedule.total_iters {
        let view_idx = select_view(iteration, views.len(), cfg.seed);
        let view = &views[view_idx];
        let out = render(scene, &view.cam);
        let active = cfg.schedule.active(iteration);
        let eval = loss::evaluate(scene, &out, view, &cfg.weights, &active, None);

        if !eval.breakdown.total.is_finite() {
            let dir = dump_dir.unwrap_or(Path::new("."));
            std::fs::create_dir_all(dir).ok();
            let tag = format!("iter{iteration}_view{}", view.cam.id);
            pfm::write_scalar(&dir.join(format!("{tag}_depth.pfm")), &out.depth).ok();
            pfm::write_scalar(&dir.join(format!("{tag}_acc.pfm")), &out.acc).ok();
            pfm::write_vector(&dir.join(format!("{tag}_color.pfm")), &out.color).ok();
            pfm::write_vector(&dir.join(format!("{tag}_normal.pfm")), &out.gs_normal).ok();
            return Err(Error::NonFiniteLoss {
                iteration,
                view: view.cam.id,
                dump_dir: dir.to_path_buf(),
            });
        }

        let mut grads = render_backward(scene, &view.cam, &out, &eval.channel_grads);
        loss::flatten_backward(scene, &mut grads, 1.0);

        let lrs = GroupLrs {
            mu: cfg.schedule.lr_mu_at(iteration),
            log_scale: cfg.schedule.lr_log_scale,
            rot: cfg.schedule.lr_rot,
            opacity: cfg.schedule.lr_opacity,
            rgb: cfg.schedule.lr_rgb,
        };
        adam.step(scene, &grads, &lrs);
        scene.normalize_rotations();
        for ls in scene.log_scale.iter_mut() {
            for c in 0..3 {
                ls[c] = ls[c].clamp(LOG_SCALE_MIN, LOG_SCALE_MAX);
            }
        }

        let b = eval.breakdown;
        log.push(LossRecord {
            iteration,
            view_id: view.cam.id,
            l_rgb: b.l_rgb,
            l_s: b.l_s,
            l_dn: b.l_dn,
            l_p: b.l_p,
            l_rd: b.l_rd,
            l_rn: b.l_rn,
            w_dn: if active.dn { cfg.weights.dn } else { 0.0 },
            w_p: if active.p { cfg.weights.p } else { 0.0 },
            w_rd: if active.rd { cfg.weights.rd } else { 0.0 },
            w_rn: if active.rn { cfg.weights.rn } else { 0.0 },
            total: b.total,
            px_p: b.px_p,
            px_rd: b.px_rd,
            px_rn: b.px_rn,
            px_dn: b.px_dn,
            num_gaussians: scene.len(),
        });

        if cfg.schedule.ckpt_every > 0 && (iteration + 1) % cfg.schedule.ckpt_every == 0 {
            on_checkpoint(iteration + 1, scene)?;
        }
    }
    on_checkpoint(cfg.schedule.total_iters, scene)?;
    Ok(log)
}

/// Serialize the loss log as CSV (stable column order, shortest-roundtrip
/// float formatting, '\n' newlines) so identical runs are byte-identical.
pub fn loss_log_csv(records: &[LossRecord]) -> String {
    let mut out = String::from(
        "iteration,view_id,l_rgb,l_s,l_dn,l_p,l_rd,l_rn,w_dn,w_p,w_rd,w_rn,total,px_p,px_rd,px_rn,px_dn,num_gaussians\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.iteration,
            r.view_id,
            r.l_rgb,
            r.l_s,
            r.l_dn,
            r.l_p,
            r.l_rd,
            r.l_rn,
            r.w_dn,
            r.w_p,
            r.w_rd,
            r.w_rn,
            r.total,
            r.px_p,
            r.px_rd,
            r.px_rn,
            r.px_dn,
            r.num_gaussians
        ));
    }
    out
}

/// Quaternions unit after updates, positive scales by construction.
pub fn check_scene_health(scene: &GaussianScene) -> bool {
    scene.rot.iter().all(|q| (q.norm() - 1.0).abs() < 1e-6)
        && scene
            .log_scale
            .iter()
            .all(|ls| ls.iter().all(|x| x.is_finite() && x.exp() > 0.0))
}
