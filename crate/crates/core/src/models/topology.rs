use serde::{Deserialize, Serialize};

use crate::lsystem::{Name, SymbolString};
use crate::turtle::{OrganKind, Scene};

/// Module that opens a first-order lateral (it follows the lateral's `[`).
pub const LATERAL_MARKER: &str = "Br";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    /// Emerged leaves (positive length).
    pub leaves: usize,
    /// Main raceme plus first-order laterals that have reached anthesis.
    pub inflorescence_branches: u32,
    /// Flowers in the open stage (positive size).
    pub open_flowers: usize,
}

fn names() -> (Name, Name, Name) {
    static N: std::sync::OnceLock<(Name, Name, Name)> = std::sync::OnceLock::new();
    *N.get_or_init(|| (Name::new("Leaf"), Name::new("Flower"), Name::new("Pod")))
}

fn is_open_flower(m: &crate::lsystem::ModuleSymbol, flower: Name) -> bool {
    m.name == flower && m.param(0).unwrap_or(0.0) > 0.0
}

impl Topology {
    pub fn of(s: &SymbolString) -> Self {
        let (leaf, flower, _) = names();
        let mut t = Topology {
            leaves: 0,
            inflorescence_branches: count_first_order_branches(s),
            open_flowers: 0,
        };
        for m in s.iter() {
            if m.name == leaf && m.param(0).unwrap_or(0.0) > 0.0 {
                t.leaves += 1;
            } else if is_open_flower(m, flower) {
                t.open_flowers += 1;
            }
        }
        t
    }
}

/// 1 for the main raceme plus every depth-one branch that starts with the
/// lateral marker and bears at least one open flower or pod (a flower that
/// has already opened), so the count never drops as flowers fade.
pub fn count_first_order_branches(s: &SymbolString) -> u32 {
    let (_, flower, pod) = names();
    let marker = Name::new(LATERAL_MARKER);
    let mut count = 1;
    let mut depth = 0usize;
    // state of the depth-one branch currently open: (is lateral, has flower)
    let mut current = (false, false);
    let mut just_opened = false;
    for m in s.iter() {
        if m.name.is_push() {
            depth += 1;
            if depth == 1 {
                current = (false, false);
                just_opened = true;
                continue;
            }
        } else if m.name.is_pop() {
            if depth == 1 && current.0 && current.1 {
                count += 1;
            }
            depth = depth.saturating_sub(1);
        } else if depth >= 1 {
            if just_opened && depth == 1 && m.name == marker {
                current.0 = true;
            }
            if is_open_flower(m, flower) || m.name == pod {
                current.1 = true;
            }
        }
        just_opened = false;
    }
    count
}

/// Azimuth in degrees, atan2(y, x) of each leaf's heading, in organ order.
pub fn leaf_azimuths(scene: &Scene) -> Vec<f64> {
    scene
        .organs(OrganKind::Leaf)
        .map(|m| m.heading.y.atan2(m.heading.x).to_degrees())
        .collect()
}
