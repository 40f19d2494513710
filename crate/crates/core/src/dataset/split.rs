use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, ManifestRecord, Source};
use crate::error::{Error, Result};
use crate::models::Species;
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitType {
    Plant,
    Genotype,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestPolicy {
    Fixed100,
    AllRemaining,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Augmentation {
    None,
    All,
    EqualCount,
}

macro_rules! kebab_enum {
    ($t:ty, $($v:path => $s:literal),+) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($v => $s),+ })
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($v),)+
                    _ => Err(Error::invalid(format!("unknown {} '{s}'", stringify!($t)))),
                }
            }
        }
    };
}

kebab_enum!(UnitType, UnitType::Plant => "plant", UnitType::Genotype => "genotype");
kebab_enum!(TestPolicy, TestPolicy::Fixed100 => "fixed-100", TestPolicy::AllRemaining => "all-remaining");
kebab_enum!(Augmentation, Augmentation::None => "none", Augmentation::All => "all", Augmentation::EqualCount => "equal-count");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPolicy {
    pub unit: UnitType,
    pub test: TestPolicy,
    pub augmentation: Augmentation,
    /// Units held out for the test pool; `None` holds out all remaining units.
    pub test_units: Option<usize>,
}

impl SplitPolicy {
    /// Maize: plants, 5 held-out test plants. Canola: genotypes, every
    /// remaining genotype in the pool. Both draw 100 test images.
    pub fn for_species(species: Species) -> Self {
        match species {
            Species::Maize => SplitPolicy {
                unit: UnitType::Plant,
                test: TestPolicy::Fixed100,
                augmentation: Augmentation::None,
                test_units: Some(5),
            },
            Species::Canola => SplitPolicy {
                unit: UnitType::Genotype,
                test: TestPolicy::Fixed100,
                augmentation: Augmentation::None,
                test_units: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDescriptor {
    pub units_sampled: usize,
    pub unit_type: UnitType,
    pub test_policy: TestPolicy,
    pub augmentation: Augmentation,
    pub test_units: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSplit {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub train_units: Vec<String>,
    pub test_units: Vec<String>,
    /// Real plants behind the training units.
    pub train_plants: usize,
    pub real_train_images: usize,
    pub synthetic_train_images: usize,
    pub label: String,
    pub policy: SplitDescriptor,
}

impl ExperimentSplit {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Table row label: `2 real plant (51)` for plants, `3 genotypes (9, 32)`
/// for genotypes (plants, images). Zero units carry no parentheses.
pub fn row_label(unit: UnitType, units: usize, plants: usize, images: usize) -> String {
    match (unit, units) {
        (UnitType::Plant, 0) => "0 real plant".to_string(),
        (UnitType::Plant, i) => format!("{i} real plant ({images})"),
        (UnitType::Genotype, 0) => "0 genotypes".to_string(),
        (UnitType::Genotype, i) => format!("{i} genotypes ({plants}, {images})"),
    }
}

fn unit_of(r: &ManifestRecord, unit: UnitType) -> Result<&str> {
    match unit {
        UnitType::Plant => Ok(&r.plant_id),
        UnitType::Genotype => r
            .genotype_id
            .as_deref()
            .ok_or_else(|| Error::Data(format!("record '{}' has no genotype_id", r.image_id))),
    }
}

/// Samples `i_units` training units of `real` without replacement, holds
/// out test units from the rest and optionally appends synthetic images to
/// training. `real` is the unit pool and must not mix sources.
pub fn split_experiment(
    real: &DatasetManifest,
    synthetic: Option<&DatasetManifest>,
    i_units: usize,
    policy: SplitPolicy,
    seed: u64,
) -> Result<ExperimentSplit> {
    let species = real
        .records
        .first()
        .map(|r| r.species)
        .ok_or_else(|| Error::invalid("real manifest is empty"))?;
    if let Some(r) = real.records.iter().find(|r| r.species != species) {
        return Err(Error::Data(format!("mixed species in real manifest at '{}'", r.image_id)));
    }
    // the unit pool is normally real, but a synthetic-only pool is allowed
    let source = real.records[0].source;
    if let Some(r) = real.records.iter().find(|r| r.source != source) {
        return Err(Error::Data(format!("mixed real and synthetic records in the unit pool at '{}'", r.image_id)));
    }
    let expected = SplitPolicy::for_species(species).unit;
    if policy.unit != expected {
        return Err(Error::invalid(format!("{} splits sample by {expected}, not {}", species.as_str(), policy.unit)));
    }

    let units: BTreeSet<&str> = real.records.iter().map(|r| unit_of(r, policy.unit)).collect::<Result<_>>()?;
    let mut order: Vec<&str> = units.into_iter().collect();
    let held = policy.test_units.unwrap_or(order.len().saturating_sub(i_units));
    if i_units + held > order.len() || held == 0 {
        return Err(Error::invalid(format!(
            "{i_units} training and {held} test {}s requested but only {} available",
            policy.unit,
            order.len()
        )));
    }
    let mut rng = seeded(seed);
    order.shuffle(&mut rng);
    let train_units: HashSet<&str> = order[..i_units].iter().copied().collect();
    let test_units: HashSet<&str> = order[i_units..i_units + held].iter().copied().collect();

    let mut train = Vec::new();
    let mut pool = Vec::new();
    let mut plants = HashSet::new();
    for r in &real.records {
        let u = unit_of(r, policy.unit)?;
        if train_units.contains(u) {
            train.push(r.image_id.clone());
            plants.insert(r.plant_id.as_str());
        } else if test_units.contains(u) {
            pool.push(r.image_id.clone());
        }
    }
    let real_train = train.len();

    let test = match policy.test {
        TestPolicy::AllRemaining => pool,
        TestPolicy::Fixed100 if pool.len() <= 100 => {
            if pool.len() < 100 {
                log::warn!("test pool holds only {} images; using all of them", pool.len());
            }
            pool
        }
        TestPolicy::Fixed100 => {
            let mut idx = sample(&mut rng, pool.len(), 100).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| pool[i].clone()).collect()
        }
    };

    let synth: Vec<&ManifestRecord> = synthetic.map(|m| m.records.iter().collect()).unwrap_or_default();
    if let Some(r) = synth.iter().find(|r| r.source != Source::Synthetic) {
        return Err(Error::Data(format!("'{}' in the augmentation manifest is not synthetic", r.image_id)));
    }
    let real_ids: HashSet<&str> = real.records.iter().map(|r| r.image_id.as_str()).collect();
    if let Some(r) = synth.iter().find(|r| real_ids.contains(r.image_id.as_str())) {
        return Err(Error::Data(format!("image id '{}' is in both the real and synthetic manifests", r.image_id)));
    }
    let added: Vec<String> = match policy.augmentation {
        Augmentation::None => Vec::new(),
        Augmentation::All => synth.iter().map(|r| r.image_id.clone()).collect(),
        Augmentation::EqualCount => {
            if synth.len() < real_train {
                return Err(Error::invalid(format!(
                    "equal-count augmentation needs {real_train} synthetic images, only {} available",
                    synth.len()
                )));
            }
            let mut idx = sample(&mut rng, synth.len(), real_train).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| synth[i].image_id.clone()).collect()
        }
    };
    let synthetic_train = added.len();
    train.extend(added);
    if train.is_empty() {
        return Err(Error::invalid("nothing to train on: no real units and no synthetic images"));
    }

    let mut train_units: Vec<String> = train_units.into_iter().map(str::to_string).collect();
    let mut test_units: Vec<String> = test_units.into_iter().map(str::to_string).collect();
    train_units.sort();
    test_units.sort();
    Ok(ExperimentSplit {
        label: row_label(policy.unit, i_units, plants.len(), real_train),
        train,
        test,
        train_units,
        test_units,
        train_plants: plants.len(),
        real_train_images: real_train,
        synthetic_train_images: synthetic_train,
        policy: SplitDescriptor {
            units_sampled: i_units,
            unit_type: policy.unit,
            test_policy: policy.test,
            augmentation: policy.augmentation,
            test_units: policy.test_units,
            seed,
        },
    })
}
