//! Maize and canola presets, per-plant sampling and branch-distribution
//! calibration.

mod calibrate;
mod preset;
mod topology;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsystem::{Deriver, SymbolString};
use crate::rng::seeded;

pub use calibrate::{
    branch_counts, branch_histogram, calibrate_branch_distribution, with_branch_params, CalibrationGrid, CalibrationResult, THRESHOLD_CONST,
    VIGOUR_PARAM,
};
pub use preset::{parse_preset, PlantModelPreset, Species, StochasticParam, View};
pub use topology::{count_first_order_branches, leaf_azimuths, Topology, LATERAL_MARKER};

const MAIZE: &str = include_str!("../../presets/maize.preset");
const CANOLA: [&str; 5] = [
    include_str!("../../presets/canola_v1.preset"),
    include_str!("../../presets/canola_v2.preset"),
    include_str!("../../presets/canola_v3.preset"),
    include_str!("../../presets/canola_v4.preset"),
    include_str!("../../presets/canola_v5.preset"),
];

pub fn maize_preset() -> PlantModelPreset {
    parse_preset(MAIZE).expect("built-in maize preset parses")
}

pub fn canola_preset(variant: u32) -> Result<PlantModelPreset> {
    match variant {
        1..=5 => Ok(parse_preset(CANOLA[variant as usize - 1]).expect("built-in canola preset parses")),
        _ => Err(Error::invalid(format!("canola variant must be 1..=5, got {variant}"))),
    }
}

/// Built-in preset names: `maize`, `canola-v1` .. `canola-v5`.
pub fn preset_names() -> Vec<String> {
    let mut v = vec!["maize".to_string()];
    v.extend((1..=5).map(|i| format!("canola-v{i}")));
    v
}

/// Resolves a built-in preset by name (`canola` alone means variant 4).
pub fn preset_by_name(name: &str) -> Option<PlantModelPreset> {
    match name {
        "maize" => Some(maize_preset()),
        "canola" => canola_preset(4).ok(),
        _ => {
            let v: u32 = name.strip_prefix("canola-v")?.parse().ok()?;
            canola_preset(v).ok()
        }
    }
}

/// One simulated plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantInstance {
    pub preset: String,
    pub species: Species,
    pub variant: u32,
    pub seed: u64,
    pub params: Vec<(String, f64)>,
    /// `days[d - 1]` is the string on day `d`; empty if not retained.
    #[serde(skip)]
    pub days: Vec<SymbolString>,
    /// Topology summary per day, `topology[d - 1]` for day `d`.
    pub topology: Vec<Topology>,
}

impl PlantInstance {
    pub fn day(&self, day: u32) -> Option<&SymbolString> {
        self.days.get((day as usize).checked_sub(1)?)
    }

    pub fn topology_on(&self, day: u32) -> Option<&Topology> {
        self.topology.get((day as usize).checked_sub(1)?)
    }

    pub fn final_topology(&self) -> &Topology {
        self.topology.last().expect("timeline is at least one day")
    }

    pub fn flowering_days(&self) -> Vec<u32> {
        (1..=self.topology.len() as u32)
            .filter(|&d| self.topology[d as usize - 1].open_flowers > 0)
            .collect()
    }
}

/// Draws the stochastic parameters, in preset order, from `rng`.
fn draw_params(preset: &PlantModelPreset, rng: &mut crate::rng::SeededRng) -> Vec<(String, f64)> {
    preset
        .params
        .iter()
        .map(|p| {
            let z: f64 = StandardNormal.sample(rng);
            (p.name.clone(), p.value(z))
        })
        .collect()
}

/// Samples a plant and derives its whole timeline. Parameters are drawn
/// first and the derivation continues on the same generator, so one seed
/// fixes the standard normal draws regardless of means and deviations.
pub fn sample_plant(preset: &PlantModelPreset, seed: u64) -> Result<PlantInstance> {
    simulate(preset, seed, true)
}

pub(crate) fn simulate(preset: &PlantModelPreset, seed: u64, keep_strings: bool) -> Result<PlantInstance> {
    let mut rng = seeded(seed);
    let params = draw_params(preset, &mut rng);
    let mut model = preset.model.clone();
    for (name, value) in &params {
        model.set_constant(name, *value);
    }
    let deriver = Deriver::new(&model);
    let mut days = Vec::new();
    let mut topology = Vec::with_capacity(preset.timeline as usize);
    deriver.run(preset.timeline as usize, &mut rng, |step, s| {
        if step == 0 {
            return;
        }
        topology.push(Topology::of(s));
        if keep_strings {
            days.push(s.clone());
        }
    })?;
    Ok(PlantInstance {
        preset: preset.name.clone(),
        species: preset.species,
        variant: preset.variant,
        seed,
        params,
        days,
        topology,
    })
}
