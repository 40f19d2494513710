use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::turtle::Rgb;

use super::image::RasterImage;

/// Name of the built-in leaf texture with blade mottling and venation.
pub const CANOLA_LEAF: &str = "canola_leaf";

/// RGB texture sampled with nearest-texel lookup and clamped coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    pub image: RasterImage,
}

impl Texture {
    pub fn sample(&self, u: f64, v: f64) -> Rgb {
        let w = self.image.width;
        let h = self.image.height;
        let x = ((u.clamp(0.0, 1.0) * w as f64) as u32).min(w - 1);
        let y = ((v.clamp(0.0, 1.0) * h as f64) as u32).min(h - 1);
        self.image.get(x, y)
    }
}

fn registry() -> &'static RwLock<HashMap<String, Arc<Texture>>> {
    static REG: OnceLock<RwLock<HashMap<String, Arc<Texture>>>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut m = HashMap::new();
        m.insert(CANOLA_LEAF.to_string(), Arc::new(canola_leaf_texture()));
        RwLock::new(m)
    })
}

pub fn texture(name: &str) -> Option<Arc<Texture>> {
    registry().read().unwrap().get(name).cloned()
}

/// Makes `image` available to `Material::Texture { name }`.
pub fn register_texture(name: &str, image: RasterImage) {
    registry()
        .write()
        .unwrap()
        .insert(name.to_string(), Arc::new(Texture { image }));
}

fn hash2(x: u32, y: u32) -> f64 {
    let mut h = x.wrapping_mul(0x8DA6_B343) ^ y.wrapping_mul(0xD816_3841) ^ 0x9E37_79B9;
    h ^= h >> 13;
    h = h.wrapping_mul(0x5BD1_E995);
    h ^= h >> 15;
    (h & 0xFFFF) as f64 / 65535.0
}

fn value_noise(u: f64, v: f64, cells: f64) -> f64 {
    let (x, y) = (u * cells, v * cells);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (xi, yi) = (x0 as u32, y0 as u32);
    let a = hash2(xi, yi);
    let b = hash2(xi + 1, yi);
    let c = hash2(xi, yi + 1);
    let d = hash2(xi + 1, yi + 1);
    let top = a + (b - a) * fx;
    let bottom = c + (d - c) * fx;
    top + (bottom - top) * fy
}

/// Procedural blade texture: mottled glaucous green, pale midvein and
/// pinnate secondary veins. `u` runs base→tip, `v` across the blade.
fn canola_leaf_texture() -> Texture {
    const SIZE: u32 = 128;
    let mut img = RasterImage::filled(SIZE, SIZE, [0, 0, 0]);
    for y in 0..SIZE {
        for x in 0..SIZE {
            let u = (x as f64 + 0.5) / SIZE as f64;
            let v = (y as f64 + 0.5) / SIZE as f64;
            let n = 0.6 * value_noise(u, v, 6.0) + 0.4 * value_noise(u, v, 17.0);
            let mut c = [58.0 + 30.0 * n, 108.0 + 34.0 * n, 62.0 + 22.0 * n];
            let off = (v - 0.5).abs();
            // secondary veins leave the midrib at ~45 degrees toward the tip
            let phase = (u - off) * 9.0;
            let secondary = (phase - phase.round()).abs() < 0.06 && off > 0.03;
            if off < 0.022 {
                c = [150.0, 178.0, 128.0];
            } else if secondary {
                for (ch, add) in c.iter_mut().zip([28.0, 30.0, 22.0]) {
                    *ch += add;
                }
            }
            img.set(x, y, c.map(|ch| ch.round().clamp(0.0, 255.0) as u8));
        }
    }
    Texture { image: img }
}
