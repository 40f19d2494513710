use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::RasterImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AugmentOp {
    Crop { x: u32, y: u32, width: u32, height: u32 },
    HorizontalFlip,
    /// Adds `delta` to every channel, saturating.
    Brightness { delta: i32 },
    /// Scales channel distance from mid-gray 128 by `factor`.
    Contrast { factor: f64 },
}

fn apply(img: &RasterImage, op: &AugmentOp) -> Result<RasterImage> {
    let map = |f: &dyn Fn(u8) -> u8| {
        let mut out = img.clone();
        out.pixels.iter_mut().for_each(|v| *v = f(*v));
        out
    };
    Ok(match *op {
        AugmentOp::Crop { x, y, width, height } => {
            if width == 0 || height == 0 || x as u64 + width as u64 > img.width as u64 || y as u64 + height as u64 > img.height as u64 {
                return Err(Error::invalid(format!(
                    "crop {width}x{height}+{x}+{y} is outside the {}x{} image",
                    img.width, img.height
                )));
            }
            let mut px = Vec::with_capacity(width as usize * height as usize * 3);
            for row in y..y + height {
                let start = ((row * img.width + x) * 3) as usize;
                px.extend_from_slice(&img.pixels[start..start + width as usize * 3]);
            }
            RasterImage::from_pixels(width, height, px, img.background)?
        }
        AugmentOp::HorizontalFlip => {
            let mut out = img.clone();
            for y in 0..img.height {
                for x in 0..img.width {
                    out.set(x, y, img.get(img.width - 1 - x, y));
                }
            }
            out
        }
        AugmentOp::Brightness { delta } => map(&|v| (v as i32 + delta).clamp(0, 255) as u8),
        AugmentOp::Contrast { factor } => {
            if !factor.is_finite() || factor < 0.0 {
                return Err(Error::invalid(format!("contrast factor must be finite and nonnegative, got {factor}")));
            }
            map(&|v| ((v as f64 - 128.0) * factor + 128.0).round().clamp(0.0, 255.0) as u8)
        }
    })
}

/// Applies `ops` in order.
pub fn augment(img: &RasterImage, ops: &[AugmentOp]) -> Result<RasterImage> {
    let mut cur = img.clone();
    for op in ops {
        cur = apply(&cur, op)?;
    }
    Ok(cur)
}

/// A random crop (at least 80% per side), optional flip, brightness in
/// ±20 and contrast in [0.8, 1.2].
pub fn random_ops(rng: &mut impl Rng, width: u32, height: u32) -> Vec<AugmentOp> {
    let cw = rng.random_range((width * 4).div_ceil(5).max(1)..=width);
    let ch = rng.random_range((height * 4).div_ceil(5).max(1)..=height);
    let mut ops = vec![AugmentOp::Crop {
        x: rng.random_range(0..=width - cw),
        y: rng.random_range(0..=height - ch),
        width: cw,
        height: ch,
    }];
    if rng.random_bool(0.5) {
        ops.push(AugmentOp::HorizontalFlip);
    }
    ops.push(AugmentOp::Brightness {
        delta: rng.random_range(-20..=20),
    });
    ops.push(AugmentOp::Contrast {
        factor: rng.random_range(0.8..=1.2),
    });
    ops
}
