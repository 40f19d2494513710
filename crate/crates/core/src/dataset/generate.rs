use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::manifest::{DatasetManifest, ManifestRecord, Provenance, Source};
use crate::annotate::{annotate, default_min_pixels, AnnotationRecord, Task, View};
use crate::error::{Error, Result};
use crate::models::{sample_plant, PlantInstance, PlantModelPreset, Species};
use crate::render::{encode_image, render, Light, OrganIdBuffer, RasterImage};
use crate::rng::{mix64, seeded};
use crate::turtle::interpret;

#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub n_plants: usize,
    pub seed: u64,
    pub resolution: u32,
    /// Defaults to [`default_min_pixels`] at the chosen resolution.
    pub min_pixels: Option<usize>,
    /// Flowering days kept per canola plant.
    pub days_per_plant: usize,
    /// Off keeps every simulated day (no visible-leaf or flowering filter).
    pub apply_filters: bool,
    pub light: Light,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            n_plants: 1,
            seed: 0,
            resolution: 256,
            min_pixels: None,
            days_per_plant: 6,
            apply_filters: true,
            light: Light::default(),
        }
    }
}

/// Seed of plant `index` in a dataset generated with `seed`.
pub fn plant_seed(seed: u64, index: usize) -> u64 {
    mix64(seed, index as u64)
}

/// Renders `instance` on `day` with the preset camera and annotates it.
pub fn render_day(
    preset: &PlantModelPreset,
    instance: &PlantInstance,
    day: u32,
    resolution: u32,
    light: &Light,
    min_pixels: usize,
    image_id: &str,
    plant_index: u32,
) -> Result<(RasterImage, OrganIdBuffer, AnnotationRecord)> {
    let s = instance
        .day(day)
        .ok_or_else(|| Error::invalid(format!("day {day} is outside 1..={}", instance.days.len())))?;
    let scene = interpret(s, &preset.turtle_config())?;
    let (img, ids) = render(&scene, &preset.camera(resolution, resolution), light)?;
    let view = View {
        image_id,
        plant_id: plant_index,
        day,
        scene: &scene,
        idbuf: &ids,
    };
    let rec = annotate(instance, &view, Task::for_species(preset.species), min_pixels)?;
    Ok((img, ids, rec))
}

fn candidate_days(preset: &PlantModelPreset, plant: &PlantInstance, cfg: &GenerateConfig) -> Vec<u32> {
    if !cfg.apply_filters || preset.species == Species::Maize {
        return (1..=preset.timeline).collect();
    }
    let flowering = plant.flowering_days();
    if flowering.len() <= cfg.days_per_plant {
        if flowering.len() < cfg.days_per_plant {
            log::warn!("plant seed {} flowers on only {} days", plant.seed, flowering.len());
        }
        return flowering;
    }
    let mut rng = seeded(mix64(plant.seed, u64::MAX));
    let mut picked: Vec<u32> = sample(&mut rng, flowering.len(), cfg.days_per_plant)
        .into_iter()
        .map(|i| flowering[i])
        .collect();
    picked.sort_unstable();
    picked
}

fn plant_records(
    preset: &PlantModelPreset,
    cfg: &GenerateConfig,
    index: usize,
    min_pixels: usize,
) -> Result<Vec<(ManifestRecord, Vec<u8>)>> {
    let plant = sample_plant(preset, plant_seed(cfg.seed, index))?;
    let plant_id = format!("{}_p{index:04}", preset.name);
    let view = match preset.species {
        Species::Maize => "side",
        Species::Canola => "top",
    };
    let mut out = Vec::new();
    for day in candidate_days(preset, &plant, cfg) {
        let image_id = format!("{plant_id}_d{day:02}");
        let (img, _, rec) = render_day(preset, &plant, day, cfg.resolution, &cfg.light, min_pixels, &image_id, index as u32)?;
        if cfg.apply_filters && preset.species == Species::Maize && rec.count == 0 {
            continue;
        }
        out.push((
            ManifestRecord {
                path: format!("images/{image_id}.png"),
                image_id,
                plant_id: plant_id.clone(),
                genotype_id: None,
                day,
                view: view.to_string(),
                species: preset.species,
                source: Source::Synthetic,
                variant: (preset.species == Species::Canola).then_some(preset.variant),
                task: rec.task,
                count: rec.count,
            },
            encode_image(&img)?,
        ));
    }
    Ok(out)
}

/// Simulates, renders and annotates `n_plants` plants into `out_dir`
/// (`images/*.png`, `manifest.csv`, `manifest.json`). Maize keeps days with
/// at least one visible leaf; canola keeps up to `days_per_plant` randomly
/// chosen flowering days. Output depends only on the preset and config.
pub fn generate_dataset(preset: &PlantModelPreset, cfg: &GenerateConfig, out_dir: &Path) -> Result<DatasetManifest> {
    if cfg.n_plants == 0 {
        return Err(Error::invalid("n_plants must be at least 1"));
    }
    let min_pixels = cfg.min_pixels.unwrap_or_else(|| default_min_pixels(cfg.resolution, cfg.resolution));
    let images = out_dir.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;

    let per_plant: Vec<Vec<(ManifestRecord, Vec<u8>)>> = (0..cfg.n_plants)
        .into_par_iter()
        .map(|i| plant_records(preset, cfg, i, min_pixels))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    for (rec, png) in per_plant.into_iter().flatten() {
        let path = out_dir.join(&rec.path);
        fs::write(&path, png).map_err(|e| Error::io(&path, e))?;
        records.push(rec);
    }
    let manifest = DatasetManifest {
        records,
        provenance: Provenance {
            seed: Some(cfg.seed),
            preset: Some(preset.name.clone()),
            preset_sha256: Some(format!("{:x}", Sha256::digest(preset.to_text().as_bytes()))),
            n_plants: Some(cfg.n_plants),
            resolution: Some(cfg.resolution),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        root: out_dir.to_path_buf(),
    };
    manifest.write(&out_dir.join("manifest.csv"))?;
    Ok(manifest)
}
