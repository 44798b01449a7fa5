//! Synthesis and evaluation toolkit for GUI instruction grounding data.
//!
//! The pipeline runs in stages that each have a module here:
//!
//! - [`parse`] turns platform metadata (DOM snapshots, UIA trees, Android view
//!   hierarchies) into a flat list of [`UiElement`]s.
//! - [`sampler`] measures and rebalances the element pool.
//! - [`som`] draws Set-of-Marks overlays used as visual context for the LLM.
//! - [`synth`] runs the two-step referring-expression / instruction protocol.
//! - [`dataset`] owns the on-disk formats, statistics and benchmark assembly.
//! - [`eval`] scores grounding predictions and renders teardown reports.
//! - [`review`] persists human review verdicts for benchmark construction.

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod model;
pub mod parse;
pub mod review;
pub mod sampler;
pub mod som;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    bbox_center, element_to_screen_ratio, point_in_box, ratio_bucket, BoundingBox, ElementType,
    Platform, Point, RatioBucket, ScreenDims, UiElement,
};

/// Version string stamped into record provenance.
pub const PIPELINE_VERSION: &str = concat!("groundsynth/", env!("CARGO_PKG_VERSION"));

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
