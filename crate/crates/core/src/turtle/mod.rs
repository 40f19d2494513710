//! 3D turtle interpretation of derived strings into organ-tagged geometry.
//!
//! | module | effect |
//! |---|---|
//! | `F(l)` | internode prism of length `l` and current width, then advance |
//! | `f(l)` | advance without geometry |
//! | `+(a)` `-(a)` | yaw toward / away from the left axis |
//! | `&(a)` `^(a)` | pitch down / up |
//! | `/(a)` `\(a)` | roll |
//! | `[` `]` | push / pop turtle state |
//! | `!(w)` | set width |
//! | `Leaf(len, wid, curv, tex[, twist])` | leaf blade, see [`leaf_blade`] |
//! | `Flower(size, color)` | star-shaped corolla facing the heading |
//! | `Petal(len, wid, color)` | single flat petal along the heading |
//!
//! Angles are degrees. Extra trailing parameters are ignored so grammars can
//! carry bookkeeping values (ages, target sizes) on drawable modules.

mod leaf;
mod scene;
mod vec3;

pub use leaf::{leaf_blade, leaf_surface, midrib_tip};
pub use scene::{Material, Mesh, OrganKind, Rgb, Scene, Triangle};
pub use vec3::Vec3;

use crate::error::{Error, Result};
use crate::lsystem::{GrowthFunction, Name, SymbolString};

const RENORMALIZE_EVERY: u32 = 64;

/// Position and orthonormal frame of the turtle.
///
/// `heading × left = up`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurtleState {
    pub position: Vec3,
    pub heading: Vec3,
    pub left: Vec3,
    pub up: Vec3,
    pub width: f64,
    rotations: u32,
}

impl TurtleState {
    pub fn new(width: f64) -> Self {
        Self {
            position: Vec3::ZERO,
            heading: Vec3::Z,
            left: Vec3::X,
            up: Vec3::Y,
            width,
            rotations: 0,
        }
    }

    /// Turn toward `left` (positive angle) about the up axis.
    pub fn yaw(&mut self, deg: f64) {
        let (s, c) = deg.to_radians().sin_cos();
        let (h, l) = (self.heading, self.left);
        self.heading = h * c + l * s;
        self.left = l * c - h * s;
        self.rotated();
    }

    /// Pitch down (heading toward `-up`) for a positive angle.
    pub fn pitch(&mut self, deg: f64) {
        let (s, c) = deg.to_radians().sin_cos();
        let (h, u) = (self.heading, self.up);
        self.heading = h * c - u * s;
        self.up = u * c + h * s;
        self.rotated();
    }

    /// Roll about the heading.
    pub fn roll(&mut self, deg: f64) {
        let (s, c) = deg.to_radians().sin_cos();
        let (l, u) = (self.left, self.up);
        self.left = l * c + u * s;
        self.up = u * c - l * s;
        self.rotated();
    }

    fn rotated(&mut self) {
        self.rotations += 1;
        if self.rotations >= RENORMALIZE_EVERY {
            self.renormalize();
        }
    }

    /// Gram-Schmidt on (heading, left); up is rebuilt from the cross product.
    pub fn renormalize(&mut self) {
        self.heading = self.heading.normalized();
        self.left = (self.left - self.heading * self.left.dot(self.heading)).normalized();
        self.up = self.heading.cross(self.left);
        self.rotations = 0;
    }

    pub fn orthonormality_error(&self) -> f64 {
        let (h, l, u) = (self.heading, self.left, self.up);
        [
            (h.norm() - 1.0).abs(),
            (l.norm() - 1.0).abs(),
            (u.norm() - 1.0).abs(),
            h.dot(l).abs(),
            h.dot(u).abs(),
            l.dot(u).abs(),
            (h.cross(l) - u).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn to_world(&self, local: Vec3, bend: Vec3) -> Vec3 {
        // local X along heading, Y along the bending direction, Z out of plane
        let out = self.heading.cross(bend);
        self.position + self.heading * local.x + bend * local.y + out * local.z
    }
}

/// Appearance assignments by organ kind and palette index.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialTable {
    pub internode: Material,
    pub leaf: Vec<Material>,
    pub flower: Vec<Material>,
}

impl Default for MaterialTable {
    fn default() -> Self {
        Self {
            internode: Material::Flat { color: [90, 150, 60] },
            leaf: vec![Material::Flat { color: [70, 140, 50] }],
            flower: vec![Material::Flat { color: [245, 215, 40] }],
        }
    }
}

impl MaterialTable {
    fn pick(list: &[Material], index: f64) -> Material {
        if list.is_empty() {
            return Material::default();
        }
        let i = if index.is_finite() && index >= 0.0 { index as usize } else { 0 };
        list[i.min(list.len() - 1)].clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurtleConfig {
    /// Length used by `F`/`f` without a parameter.
    pub step: f64,
    /// Angle in degrees used by rotations without a parameter.
    pub angle: f64,
    pub initial_width: f64,
    pub internode_sides: usize,
    pub leaf_segments: usize,
    /// Relative blade width along the midrib, multiplied by the `wid` parameter.
    pub leaf_profile: GrowthFunction,
    pub materials: MaterialTable,
}

impl Default for TurtleConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            angle: 90.0,
            initial_width: 0.0,
            internode_sides: 8,
            leaf_segments: 12,
            leaf_profile: GrowthFunction::constant(1.0),
            materials: MaterialTable::default(),
        }
    }
}

struct Names {
    f_draw: Name,
    f_move: Name,
    yaw_l: Name,
    yaw_r: Name,
    pitch_d: Name,
    pitch_u: Name,
    roll_r: Name,
    roll_l: Name,
    width: Name,
    leaf: Name,
    flower: Name,
    petal: Name,
}

impl Names {
    fn get() -> &'static Names {
        static NAMES: std::sync::OnceLock<Names> = std::sync::OnceLock::new();
        NAMES.get_or_init(|| Names {
            f_draw: Name::new("F"),
            f_move: Name::new("f"),
            yaw_l: Name::new("+"),
            yaw_r: Name::new("-"),
            pitch_d: Name::new("&"),
            pitch_u: Name::new("^"),
            roll_r: Name::new("/"),
            roll_l: Name::new("\\"),
            width: Name::new("!"),
            leaf: Name::new("Leaf"),
            flower: Name::new("Flower"),
            petal: Name::new("Petal"),
        })
    }
}

/// Interprets `s` and returns the organ geometry it describes.
pub fn interpret(s: &SymbolString, config: &TurtleConfig) -> Result<Scene> {
    let n = Names::get();
    let mut scene = Scene::default();
    let mut state = TurtleState::new(config.initial_width);
    let mut stack: Vec<TurtleState> = Vec::new();
    let mut next_id: u32 = 1;
    let mut organ = |scene: &mut Scene, kind, triangles, material, st: &TurtleState| {
        scene.meshes.push(Mesh {
            organ_id: next_id,
            kind,
            triangles,
            material,
            origin: st.position,
            heading: st.heading,
        });
        next_id += 1;
    };

    for m in s.iter() {
        let p = |i: usize, default: f64| m.param(i).unwrap_or(default);
        let name = m.name;
        if name.is_push() {
            stack.push(state);
        } else if name.is_pop() {
            state = stack
                .pop()
                .ok_or_else(|| Error::invalid("unbalanced ']' in interpreted string"))?;
        } else if name == n.f_draw {
            let len = p(0, config.step);
            let tris = internode(&state, len, config.internode_sides);
            organ(&mut scene, OrganKind::Internode, tris, config.materials.internode.clone(), &state);
            state.position += state.heading * len;
        } else if name == n.f_move {
            state.position += state.heading * p(0, config.step);
        } else if name == n.yaw_l {
            state.yaw(p(0, config.angle));
        } else if name == n.yaw_r {
            state.yaw(-p(0, config.angle));
        } else if name == n.pitch_d {
            state.pitch(p(0, config.angle));
        } else if name == n.pitch_u {
            state.pitch(-p(0, config.angle));
        } else if name == n.roll_r {
            state.roll(p(0, config.angle));
        } else if name == n.roll_l {
            state.roll(-p(0, config.angle));
        } else if name == n.width {
            state.width = p(0, state.width);
        } else if name == n.leaf {
            let (len, wid, curv, tex, twist) = (p(0, 0.0), p(1, 0.0), p(2, 0.0), p(3, 0.0), p(4, 0.0));
            let tris = if len > 0.0 {
                let local = leaf_blade(len, |u| wid * config.leaf_profile.at(u), curv, twist, config.leaf_segments)?;
                let bend = -state.up;
                transform(&state, local, bend)
            } else {
                Vec::new()
            };
            let material = MaterialTable::pick(&config.materials.leaf, tex);
            organ(&mut scene, OrganKind::Leaf, tris, material, &state);
        } else if name == n.flower {
            let (size, color) = (p(0, 0.0), p(1, 0.0));
            let tris = if size > 0.0 { corolla(&state, size) } else { Vec::new() };
            let material = MaterialTable::pick(&config.materials.flower, color);
            organ(&mut scene, OrganKind::Flower, tris, material, &state);
        } else if name == n.petal {
            let (len, wid, color) = (p(0, 0.0), p(1, 0.0), p(2, 0.0));
            let tris = if len > 0.0 {
                transform(&state, leaf_blade(len, |_| wid, 0.0, 0.0, 2)?, -state.up)
            } else {
                Vec::new()
            };
            let material = MaterialTable::pick(&config.materials.flower, color);
            organ(&mut scene, OrganKind::Petal, tris, material, &state);
        } else {
            scene.skipped.insert(name.as_str().to_string());
        }
    }
    if !stack.is_empty() {
        return Err(Error::invalid("unbalanced '[' in interpreted string"));
    }
    Ok(scene)
}

fn transform(state: &TurtleState, local: Vec<Triangle>, bend: Vec3) -> Vec<Triangle> {
    local
        .into_iter()
        .map(|t| Triangle {
            v: t.v.map(|v| state.to_world(v, bend)),
            uv: t.uv,
        })
        .collect()
}

fn internode(state: &TurtleState, len: f64, sides: usize) -> Vec<Triangle> {
    let r = 0.5 * state.width;
    if !(r > 0.0) || !(len > 0.0) || sides < 3 {
        return Vec::new();
    }
    let ring = |k: usize| {
        let a = std::f64::consts::TAU * k as f64 / sides as f64;
        (state.left * a.cos() + state.up * a.sin()) * r
    };
    let top = state.heading * len;
    let mut tris = Vec::with_capacity(2 * sides);
    for k in 0..sides {
        let (u0, u1) = (k as f64 / sides as f64, (k + 1) as f64 / sides as f64);
        let a = state.position + ring(k);
        let b = state.position + ring(k + 1);
        tris.push(Triangle {
            v: [a, b, b + top],
            uv: [[u0, 0.0], [u1, 0.0], [u1, 1.0]],
        });
        tris.push(Triangle {
            v: [a, b + top, a + top],
            uv: [[u0, 0.0], [u1, 1.0], [u0, 1.0]],
        });
    }
    tris
}

/// Five-lobed star in the plane perpendicular to the heading.
fn corolla(state: &TurtleState, size: f64) -> Vec<Triangle> {
    const POINTS: usize = 10;
    let center = state.position;
    let rim = |k: usize| {
        let a = std::f64::consts::TAU * k as f64 / POINTS as f64;
        let r = if k % 2 == 0 { 0.5 * size } else { 0.25 * size };
        center + (state.left * a.cos() + state.up * a.sin()) * r
    };
    (0..POINTS)
        .map(|k| Triangle {
            v: [center, rim(k), rim((k + 1) % POINTS)],
            uv: [[0.5, 0.5], [1.0, 0.0], [1.0, 1.0]],
        })
        .collect()
}
