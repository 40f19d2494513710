//! Procedural plant simulation with parametric L-systems, synthetic image
//! generation with occlusion-aware annotation, real-image preprocessing,
//! experiment splits and phenotyping metrics.
//!
//! The pipeline runs `lsystem` (derive symbol strings) → `turtle` (3D organ
//! geometry) → `render` (z-buffered image plus organ id buffer) →
//! `annotate` (ground-truth counts) → `dataset` (manifests and splits) →
//! `metrics` (evaluation of externally produced predictions).

pub mod annotate;
pub mod baseline;
pub mod dataset;
pub mod error;
pub mod lsystem;
pub mod metrics;
pub mod models;
pub mod preprocess;
pub mod render;
pub mod rng;
pub mod turtle;

pub use error::{Error, ParseError, Result};
