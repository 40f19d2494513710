#![allow(dead_code)]

use std::path::PathBuf;

use lsynth::annotate::Task;
use lsynth::dataset::{DatasetManifest, ManifestRecord, Provenance, Source};
use lsynth::models::Species;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn record(id: String, plant: String, genotype: Option<String>, day: u32, species: Species, source: Source, count: u32) -> ManifestRecord {
    ManifestRecord {
        path: format!("{id}.png"),
        image_id: id,
        plant_id: plant,
        genotype_id: genotype,
        day,
        view: "side".into(),
        species,
        source,
        variant: None,
        task: Task::for_species(species),
        count,
    }
}

fn manifest(records: Vec<ManifestRecord>) -> DatasetManifest {
    DatasetManifest {
        records,
        provenance: Provenance::default(),
        root: PathBuf::new(),
    }
}

/// Real maize table shaped like a 13-plant imaging run: 20 to 30 images per plant.
pub fn real_maize(seed: u64) -> DatasetManifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut recs = Vec::new();
    for p in 0..13 {
        for d in 0..rng.random_range(20..=30) {
            recs.push(record(format!("real_m{p:02}_{d:02}"), format!("m{p:02}"), None, d + 1, Species::Maize, Source::Real, d / 2));
        }
    }
    manifest(recs)
}

/// Real canola table: 45 genotypes, 3 plants each, 3 or 4 images per plant.
pub fn real_canola(seed: u64) -> DatasetManifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut recs = Vec::new();
    for g in 0..45 {
        for p in 0..3 {
            for d in 0..rng.random_range(3..=4) {
                recs.push(record(
                    format!("real_c{g:02}_{p}_{d}"),
                    format!("c{g:02}_{p}"),
                    Some(format!("g{g:02}")),
                    30 + d,
                    Species::Canola,
                    Source::Real,
                    rng.random_range(1..9),
                ));
            }
        }
    }
    manifest(recs)
}

pub fn synthetic(species: Species, n: usize) -> DatasetManifest {
    manifest(
        (0..n)
            .map(|i| record(format!("syn_{i:04}"), format!("s{}", i / 20), None, 1 + i as u32 % 20, species, Source::Synthetic, 3))
            .collect(),
    )
}
