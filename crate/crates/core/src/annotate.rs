//! Ground-truth counts from plant topology and rendered visibility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{PlantInstance, Species};
use crate::render::OrganIdBuffer;
use crate::turtle::{OrganKind, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    LeafCount,
    InflorescenceBranchCount,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::LeafCount => "leaf_count",
            Task::InflorescenceBranchCount => "inflorescence_branch_count",
        }
    }

    pub fn for_species(species: Species) -> Task {
        match species {
            Species::Maize => Task::LeafCount,
            Species::Canola => Task::InflorescenceBranchCount,
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leaf_count" => Ok(Task::LeafCount),
            "inflorescence_branch_count" => Ok(Task::InflorescenceBranchCount),
            _ => Err(Error::invalid(format!("unknown task '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrganVisibility {
    pub organ_id: u32,
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub image_id: String,
    pub plant_id: u32,
    pub day: u32,
    pub species: Species,
    pub task: Task,
    pub count: u32,
    pub visibility: Vec<OrganVisibility>,
}

/// Visible-pixel threshold at 256×256 (a 5×5 patch).
pub const DEFAULT_MIN_PIXELS: usize = 25;

/// [`DEFAULT_MIN_PIXELS`] scaled by image area relative to 256×256, at least 1.
pub fn default_min_pixels(width: u32, height: u32) -> usize {
    let scale = (width as f64 * height as f64) / (256.0 * 256.0);
    ((DEFAULT_MIN_PIXELS as f64 * scale).round() as usize).max(1)
}

fn visibility(idbuf: &OrganIdBuffer, scene: &Scene, kind: OrganKind) -> Result<Vec<OrganVisibility>> {
    let hist = idbuf.histogram();
    if let Some((&id, _)) = hist.iter().find(|(id, _)| scene.mesh(**id).is_none()) {
        return Err(Error::invalid(format!("id buffer contains organ {id}, which is not in the scene")));
    }
    Ok(scene
        .organs(kind)
        .map(|m| OrganVisibility {
            organ_id: m.organ_id,
            pixels: hist.get(&m.organ_id).copied().unwrap_or(0),
        })
        .collect())
}

/// Counts leaves with at least `min_pixels` visible pixels in `idbuf`.
pub fn count_visible_leaves(
    idbuf: &OrganIdBuffer,
    scene: &Scene,
    min_pixels: usize,
) -> Result<(u32, Vec<OrganVisibility>)> {
    if min_pixels == 0 {
        return Err(Error::invalid("min_pixels must be positive"));
    }
    let vis = visibility(idbuf, scene, OrganKind::Leaf)?;
    let count = vis.iter().filter(|v| v.pixels >= min_pixels).count() as u32;
    Ok((count, vis))
}

/// Main raceme plus qualifying first-order laterals on `day` (the last
/// simulated day when `None` or past the timeline). View independent.
pub fn count_inflorescence_branches(instance: &PlantInstance, day: Option<u32>) -> u32 {
    let n = instance.topology.len();
    if n == 0 {
        return 1;
    }
    let d = day.map_or(n, |d| (d as usize).clamp(1, n));
    instance.topology[d - 1].inflorescence_branches
}

/// Rendered view of one plant on one day.
pub struct View<'a> {
    pub image_id: &'a str,
    pub plant_id: u32,
    pub day: u32,
    pub scene: &'a Scene,
    pub idbuf: &'a OrganIdBuffer,
}

pub fn annotate(instance: &PlantInstance, view: &View<'_>, task: Task, min_pixels: usize) -> Result<AnnotationRecord> {
    if task != Task::for_species(instance.species) {
        return Err(Error::invalid(format!(
            "task {} does not apply to {}",
            task.as_str(),
            instance.species.as_str()
        )));
    }
    let (count, visibility) = match task {
        Task::LeafCount => count_visible_leaves(view.idbuf, view.scene, min_pixels)?,
        Task::InflorescenceBranchCount => {
            if min_pixels == 0 {
                return Err(Error::invalid("min_pixels must be positive"));
            }
            let vis = visibility(view.idbuf, view.scene, OrganKind::Flower)?;
            (count_inflorescence_branches(instance, Some(view.day)), vis)
        }
    };
    Ok(AnnotationRecord {
        image_id: view.image_id.to_string(),
        plant_id: view.plant_id,
        day: view.day,
        species: instance.species,
        task,
        count,
        visibility,
    })
}
