//! File formats the pipeline stages communicate through.

pub mod cameras;
pub mod pfm;
pub mod ply;
pub mod png;
