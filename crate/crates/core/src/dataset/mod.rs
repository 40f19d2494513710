//! Synthetic dataset generation, real annotation ingest, train/test splits
//! and training-time augmentation.

mod augment;
mod generate;
mod manifest;
mod split;

pub use augment::{augment, random_ops, AugmentOp};
pub use generate::{generate_dataset, plant_seed, render_day, GenerateConfig};
pub use manifest::{ingest_real_annotations, DatasetManifest, Ingested, ManifestRecord, Provenance, Source};
pub use split::{row_label, split_experiment, Augmentation, ExperimentSplit, SplitDescriptor, SplitPolicy, TestPolicy, UnitType};
