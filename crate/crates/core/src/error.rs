use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pixel ({u}, {v}) out of bounds for {width}x{height} map")]
    OutOfBounds {
        u: usize,
        v: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid depth sample at ({u}, {v})")]
    InvalidSample { u: usize, v: usize },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("scale/shift alignment needs at least {needed} samples, got {got}")]
    AlignmentFailed { needed: usize, got: usize },
    #[error("degenerate alignment: recovered scale {s} is not positive")]
    DegenerateAlignment { s: f64 },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("non-finite loss at iteration {iteration} on view {view}; rasters dumped to {dump_dir}")]
    NonFiniteLoss {
        iteration: usize,
        view: u32,
        dump_dir: PathBuf,
    },
    #[error("stage `{stage}` requires missing artifact: {path}")]
    MissingArtifact { stage: String, path: PathBuf },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {msg}")]
    FileFormat { path: PathBuf, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Errors a user can fix by correcting inputs or configuration, as
    /// opposed to runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::MissingArtifact { .. } | Error::InvalidCamera(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
