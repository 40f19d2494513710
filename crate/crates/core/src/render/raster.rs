use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::turtle::{Material, Rgb, Scene, Triangle, Vec3};

use super::image::{OrganIdBuffer, RasterImage};
use super::texture::texture;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Projection {
    /// `extent` is the world-space height of the view volume.
    Orthographic { extent: f64 },
    /// Vertical field of view in degrees.
    Perspective { fov_deg: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub projection: Projection,
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub width: u32,
    pub height: u32,
}

pub const MIN_RESOLUTION: u32 = 16;

/// Directional light. `direction` points from the light into the scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Light {
    pub direction: Vec3,
    pub ambient: f64,
    pub diffuse: f64,
    pub background: Rgb,
}

impl Default for Light {
    fn default() -> Self {
        Self {
            direction: Vec3::new(-0.3, -0.4, -1.0),
            ambient: 0.35,
            diffuse: 0.65,
            background: [0, 0, 0],
        }
    }
}

struct Basis {
    right: Vec3,
    up: Vec3,
    forward: Vec3,
}

impl Camera {
    pub fn orthographic(position: Vec3, look_at: Vec3, up: Vec3, extent: f64, width: u32, height: u32) -> Self {
        Self {
            projection: Projection::Orthographic { extent },
            position,
            look_at,
            up,
            width,
            height,
        }
    }

    pub fn perspective(position: Vec3, look_at: Vec3, up: Vec3, fov_deg: f64, width: u32, height: u32) -> Self {
        Self {
            projection: Projection::Perspective { fov_deg },
            position,
            look_at,
            up,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < MIN_RESOLUTION || self.height < MIN_RESOLUTION {
            return Err(Error::invalid(format!(
                "resolution {}x{} is below the {MIN_RESOLUTION}x{MIN_RESOLUTION} minimum",
                self.width, self.height
            )));
        }
        let dir = self.look_at - self.position;
        if !dir.is_finite() || dir.norm() == 0.0 {
            return Err(Error::invalid("camera look direction is zero"));
        }
        if !self.up.is_finite() || dir.cross(self.up).norm() <= 1e-12 * dir.norm() * self.up.norm() {
            return Err(Error::invalid("camera up vector is zero or parallel to the look direction"));
        }
        match self.projection {
            Projection::Orthographic { extent } if !(extent > 0.0 && extent.is_finite()) => {
                Err(Error::invalid("orthographic extent must be positive (zero-area viewport)"))
            }
            Projection::Perspective { fov_deg } if !(fov_deg > 0.0 && fov_deg < 180.0) => {
                Err(Error::invalid("field of view must be in (0, 180) degrees"))
            }
            _ => Ok(()),
        }
    }

    fn basis(&self) -> Basis {
        let forward = (self.look_at - self.position).normalized();
        let right = forward.cross(self.up).normalized();
        let up = right.cross(forward);
        Basis { right, up, forward }
    }

    /// Screen x, y (pixels, y down) and view depth for each corner, or
    /// `None` when a perspective vertex is not in front of the camera.
    fn project(&self, b: &Basis, p: Vec3) -> Option<[f64; 3]> {
        let d = p - self.position;
        let (x, y, z) = (d.dot(b.right), d.dot(b.up), d.dot(b.forward));
        let (w, h) = (self.width as f64, self.height as f64);
        let (nx, ny) = match self.projection {
            Projection::Orthographic { extent } => {
                let half_h = extent / 2.0;
                (x / (half_h * w / h), y / half_h)
            }
            Projection::Perspective { fov_deg } => {
                if z <= 1e-9 {
                    return None;
                }
                let t = (fov_deg.to_radians() / 2.0).tan();
                (x / (z * t * w / h), y / (z * t))
            }
        };
        Some([(nx + 1.0) * w / 2.0, (1.0 - ny) * h / 2.0, z])
    }
}

#[inline]
fn edge(a: [f64; 3], b: [f64; 3], px: f64, py: f64) -> f64 {
    (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0])
}

/// With the winding normalised to positive area (y down), an edge is "top"
/// when horizontal and running right, "left" when running up.
#[inline]
fn top_left(a: [f64; 3], b: [f64; 3]) -> bool {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    (dy == 0.0 && dx > 0.0) || dy < 0.0
}

#[inline]
fn inside(e: f64, tl: bool) -> bool {
    e > 0.0 || (e == 0.0 && tl)
}

fn shade(base: Rgb, intensity: f64) -> Rgb {
    base.map(|c| (c as f64 * intensity).round().clamp(0.0, 255.0) as u8)
}

enum Surface {
    Flat(Rgb),
    Veined(Rgb, Rgb, f64),
    Texture(std::sync::Arc<super::texture::Texture>),
}

impl Surface {
    fn of(m: &Material) -> Result<Self> {
        Ok(match m {
            Material::Flat { color } => Surface::Flat(*color),
            Material::Veined { color, vein, half_width } => Surface::Veined(*color, *vein, *half_width),
            Material::Texture { name } => {
                Surface::Texture(texture(name).ok_or_else(|| Error::invalid(format!("unknown texture '{name}'")))?)
            }
        })
    }

    fn needs_uv(&self) -> bool {
        !matches!(self, Surface::Flat(_))
    }

    fn color(&self, uv: [f64; 2]) -> Rgb {
        match self {
            Surface::Flat(c) => *c,
            Surface::Veined(c, v, hw) => {
                if (uv[1] - 0.5).abs() <= *hw {
                    *v
                } else {
                    *c
                }
            }
            Surface::Texture(t) => t.sample(uv[0], uv[1]),
        }
    }
}

/// Z-buffered rasterization of every mesh. Pixel centres are sampled with
/// a top-left fill rule; the strictly nearer fragment wins.
pub fn render(scene: &Scene, camera: &Camera, light: &Light) -> Result<(RasterImage, OrganIdBuffer)> {
    camera.validate()?;
    let (w, h) = (camera.width, camera.height);
    let mut img = RasterImage::filled(w, h, light.background);
    let mut ids = OrganIdBuffer::new(w, h);
    let mut depth = vec![f64::INFINITY; w as usize * h as usize];
    let basis = camera.basis();
    let to_light = -light.direction.normalized();
    let perspective = matches!(camera.projection, Projection::Perspective { .. });

    for mesh in &scene.meshes {
        let surface = Surface::of(&mesh.material)?;
        for tri in &mesh.triangles {
            if !tri.v.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("non-finite vertex in organ {}", mesh.organ_id)));
            }
            let intensity = lambert(tri, to_light, light);
            let Some(p0) = camera.project(&basis, tri.v[0]) else { continue };
            let Some(p1) = camera.project(&basis, tri.v[1]) else { continue };
            let Some(p2) = camera.project(&basis, tri.v[2]) else { continue };
            let (mut p, mut uv) = ([p0, p1, p2], tri.uv);
            let mut area = edge(p[0], p[1], p[2][0], p[2][1]);
            if area == 0.0 {
                continue;
            }
            if area < 0.0 {
                p.swap(1, 2);
                uv.swap(1, 2);
                area = -area;
            }
            let tl = [top_left(p[1], p[2]), top_left(p[2], p[0]), top_left(p[0], p[1])];
            let min_x = p.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min);
            let max_x = p.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max);
            let min_y = p.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min);
            let max_y = p.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max);
            // pixel x covers centre x + 0.5
            let x0 = ((min_x - 0.5).ceil().max(0.0)) as i64;
            let x1 = ((max_x - 0.5).floor().min(w as f64 - 1.0)) as i64;
            let y0 = ((min_y - 0.5).ceil().max(0.0)) as i64;
            let y1 = ((max_y - 0.5).floor().min(h as f64 - 1.0)) as i64;
            let inv_z = [1.0 / p[0][2], 1.0 / p[1][2], 1.0 / p[2][2]];
            for y in y0..=y1 {
                let py = y as f64 + 0.5;
                for x in x0..=x1 {
                    let px = x as f64 + 0.5;
                    let e0 = edge(p[1], p[2], px, py);
                    let e1 = edge(p[2], p[0], px, py);
                    let e2 = edge(p[0], p[1], px, py);
                    if !(inside(e0, tl[0]) && inside(e1, tl[1]) && inside(e2, tl[2])) {
                        continue;
                    }
                    let b = [e0 / area, e1 / area, e2 / area];
                    let (z, wts) = if perspective {
                        let iz = b[0] * inv_z[0] + b[1] * inv_z[1] + b[2] * inv_z[2];
                        let z = 1.0 / iz;
                        (z, [b[0] * inv_z[0] * z, b[1] * inv_z[1] * z, b[2] * inv_z[2] * z])
                    } else {
                        (b[0] * p[0][2] + b[1] * p[1][2] + b[2] * p[2][2], b)
                    };
                    let i = y as usize * w as usize + x as usize;
                    if !(z < depth[i]) {
                        continue;
                    }
                    depth[i] = z;
                    ids.ids[i] = mesh.organ_id;
                    let tex = if surface.needs_uv() {
                        [
                            wts[0] * uv[0][0] + wts[1] * uv[1][0] + wts[2] * uv[2][0],
                            wts[0] * uv[0][1] + wts[1] * uv[1][1] + wts[2] * uv[2][1],
                        ]
                    } else {
                        [0.0, 0.0]
                    };
                    img.set(x as u32, y as u32, shade(surface.color(tex), intensity));
                }
            }
        }
    }
    Ok((img, ids))
}

/// Two-sided Lambert term plus ambient, capped at 1.
fn lambert(tri: &Triangle, to_light: Vec3, light: &Light) -> f64 {
    let n = (tri.v[1] - tri.v[0]).cross(tri.v[2] - tri.v[0]).normalized();
    (light.ambient + light.diffuse * n.dot(to_light).abs()).min(1.0)
}
