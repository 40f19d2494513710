use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::vec3::Vec3;

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrganKind {
    Internode,
    Leaf,
    Flower,
    Petal,
}

impl OrganKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OrganKind::Internode => "internode",
            OrganKind::Leaf => "leaf",
            OrganKind::Flower => "flower",
            OrganKind::Petal => "petal",
        }
    }
}

/// Surface appearance of an organ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Material {
    Flat { color: Rgb },
    /// Flat color with a midvein stripe `|v - 0.5| <= half_width` in texture space.
    Veined { color: Rgb, vein: Rgb, half_width: f64 },
    /// Named image texture sampled with the mesh texture coordinates.
    Texture { name: String },
}

impl Default for Material {
    fn default() -> Self {
        Material::Flat { color: [70, 140, 50] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v: [Vec3; 3],
    pub uv: [[f64; 2]; 3],
}

/// Geometry of one organ.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    /// Nonzero; 0 is reserved for background in id buffers.
    pub organ_id: u32,
    pub kind: OrganKind,
    pub triangles: Vec<Triangle>,
    pub material: Material,
    /// Turtle position and heading when the organ was emitted.
    pub origin: Vec3,
    pub heading: Vec3,
}

/// Organ-tagged triangle geometry of one plant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scene {
    pub meshes: Vec<Mesh>,
    /// Modules that have no drawing interpretation and were skipped.
    pub skipped: BTreeSet<String>,
}

impl Scene {
    pub fn organs(&self, kind: OrganKind) -> impl Iterator<Item = &Mesh> {
        self.meshes.iter().filter(move |m| m.kind == kind)
    }

    pub fn mesh(&self, organ_id: u32) -> Option<&Mesh> {
        self.meshes.iter().find(|m| m.organ_id == organ_id)
    }

    pub fn triangle_count(&self) -> usize {
        self.meshes.iter().map(|m| m.triangles.len()).sum()
    }

    /// Plain-text triangle soup: `organ_id kind x0 y0 z0 x1 y1 z1 x2 y2 z2`.
    pub fn to_triangle_soup(&self) -> String {
        let mut out = String::new();
        for m in &self.meshes {
            for t in &m.triangles {
                write!(out, "{} {}", m.organ_id, m.kind.as_str()).unwrap();
                for v in &t.v {
                    write!(out, " {} {} {}", v.x, v.y, v.z).unwrap();
                }
                out.push('\n');
            }
        }
        out
    }
}
