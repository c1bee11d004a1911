//! Run configuration: one JSON (or TOML) document driving every pipeline
//! stage. Unset schedule fields resolve against the reference ratios.

use crate::error::{Error, Result};
use crate::loss::LossWeights;
use crate::lp3::Lp3Config;
use crate::optim::Schedule;
use crate::priors::PriorConfig;
use crate::splat::InitConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathsConfig {
    pub cameras: PathBuf,
    pub images_dir: PathBuf,
    pub prior_depth_dir: PathBuf,
    pub confidence_dir: PathBuf,
    pub sparse_dir: PathBuf,
    pub boxes: PathBuf,
    pub masks_index: PathBuf,
    pub adjacency: PathBuf,
    #[serde(default)]
    pub gt_mesh: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub total_iters: usize,
    #[serde(default)]
    pub start_dn: Option<usize>,
    #[serde(default)]
    pub start_p: Option<usize>,
    #[serde(default)]
    pub start_rd: Option<usize>,
    #[serde(default)]
    pub start_rn: Option<usize>,
    #[serde(default)]
    pub lr_mu: Option<f64>,
    #[serde(default)]
    pub lr_mu_final: Option<f64>,
    #[serde(default)]
    pub lr_log_scale: Option<f64>,
    #[serde(default)]
    pub lr_rot: Option<f64>,
    #[serde(default)]
    pub lr_opacity: Option<f64>,
    #[serde(default)]
    pub lr_rgb: Option<f64>,
    #[serde(default)]
    pub ckpt_every: Option<usize>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            total_iters: 30000,
            start_dn: None,
            start_p: None,
            start_rd: None,
            start_rn: None,
            lr_mu: None,
            lr_mu_final: None,
            lr_log_scale: None,
            lr_rot: None,
            lr_opacity: None,
            lr_rgb: None,
            ckpt_every: None,
        }
    }
}

impl ScheduleConfig {
    /// Unset starts keep the 7/30, 14/30, 20/30 ratios of the total budget.
    pub fn resolve(&self) -> Result<Schedule> {
        let mut s = Schedule::with_total(self.total_iters);
        if let Some(v) = self.start_dn {
            s.start_dn = v;
        }
        if let Some(v) = self.start_p {
            s.start_p = v;
        }
        if let Some(v) = self.start_rd {
            s.start_rd = v;
        }
        if let Some(v) = self.start_rn {
            s.start_rn = v;
        }
        if let Some(v) = self.lr_mu {
            s.lr_mu = v;
        }
        if let Some(v) = self.lr_mu_final {
            s.lr_mu_final = v;
        }
        if let Some(v) = self.lr_log_scale {
            s.lr_log_scale = v;
        }
        if let Some(v) = self.lr_rot {
            s.lr_rot = v;
        }
        if let Some(v) = self.lr_opacity {
            s.lr_opacity = v;
        }
        if let Some(v) = self.lr_rgb {
            s.lr_rgb = v;
        }
        if let Some(v) = self.ckpt_every {
            s.ckpt_every = v;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TsdfConfig {
    pub voxel_size: f64,
    /// Truncation distance as a multiple of the voxel size.
    pub trunc_factor: f64,
    pub depth_max: f64,
    /// Reconstruction bounds; derived from the Gaussian centers when unset.
    #[serde(default)]
    pub bounds_lo: Option<[f64; 3]>,
    #[serde(default)]
    pub bounds_hi: Option<[f64; 3]>,
}

impl Default for TsdfConfig {
    fn default() -> Self {
        Self {
            voxel_size: 0.02,
            trunc_factor: 4.0,
            depth_max: 20.0,
            bounds_lo: None,
            bounds_hi: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub samples_n: usize,
    pub f1_thresh_cm: f64,
    pub seed: u64,
    #[serde(default)]
    pub heatmaps: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples_n: 200_000,
            f1_thresh_cm: 5.0,
            seed: 0,
            heatmaps: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub lp3: Lp3Config,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub lambda: LossWeights,
    #[serde(default)]
    pub tsdf: TsdfConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub seed: u64,
    /// Recorded for provenance only; never interpreted.
    #[serde(default)]
    pub prompts: Vec<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::FileFormat {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::FileFormat {
            path: path.to_path_buf(),
            msg: format!("config parse error: {e}"),
        })?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Check that every referenced input exists.
    pub fn validate_inputs(&self) -> Result<()> {
        let mut missing = Vec::new();
        for (_name, p) in [
            ("cameras", &self.paths.cameras),
            ("images_dir", &self.paths.images_dir),
            ("prior_depth_dir", &self.paths.prior_depth_dir),
            ("confidence_dir", &self.paths.confidence_dir),
            ("sparse_dir", &self.paths.sparse_dir),
            ("boxes", &self.paths.boxes),
            ("masks_index", &self.paths.masks_index),
            ("adjacency", &self.paths.adjacency),
        ] {
            if !p.exists() {
                missing.push(p.display().to_string());
            }
        }
        if let Some(gt) = &self.paths.gt_mesh {
            if !gt.exists() {
                missing.push(gt.display().to_string());
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "missing input paths: {}",
                missing.join(", ")
            )))
        }
    }
}
