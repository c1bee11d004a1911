//! Indoor surface reconstruction from posed RGB images, depth/confidence
//! priors and plane-region proposals.
//!
//! The crate refines noisy plane proposals into per-view plane label maps
//! (cross-view fusion + geometric inspection), optimizes a flattened-Gaussian
//! scene under planar and geometric prior losses, and extracts meshes via
//! TSDF fusion. Everything is deterministic under a fixed seed.

pub mod config;
pub mod error;
pub mod io;
pub mod kdtree;
pub mod loss;
pub mod lp3;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod priors;
pub mod render;
pub mod fixture;
pub mod fusion;
pub mod geometry;
pub mod raster;
pub mod splat;

pub use error::{Error, Result};
