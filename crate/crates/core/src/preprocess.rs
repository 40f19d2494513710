//! Real-image segmentation: background subtraction, Otsu and excess-green
//! thresholding, convex hulls and best-view selection.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{decode_image, RasterImage};
use crate::turtle::Rgb;

/// Default excess-green threshold on 0–255 channels.
pub const DEFAULT_EXG_THRESHOLD: i32 = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    fn check_same(&self, other: &BinaryMask) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::DimensionMismatch(format!(
                "masks are {}x{} and {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.check_same(other)?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        })
    }

    /// Intersection over union; two empty masks give 1.
    pub fn iou(&self, other: &BinaryMask) -> Result<f64> {
        self.check_same(other)?;
        let (mut inter, mut union) = (0usize, 0usize);
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += usize::from(*a && *b);
            union += usize::from(*a || *b);
        }
        Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
    }

    /// Foreground pixel centres as (x, y).
    pub fn points(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| ((i % w) as i64, (i / w) as i64))
    }

    /// 1-bit grayscale PNG, foreground white.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let stride = (self.width as usize).div_ceil(8);
        let mut data = vec![0u8; stride * self.height as usize];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                let (x, y) = (i % self.width as usize, i / self.width as usize);
                data[y * stride + x / 8] |= 0x80 >> (x % 8);
            }
        }
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, self.width, self.height);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::One);
        let png_err = |e: png::EncodingError| Error::Data(format!("png encoding failed: {e}"));
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&data).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
        Ok(out)
    }

    /// Reads any grayscale or colour image; luma above 127 is foreground.
    pub fn decode_png(bytes: &[u8]) -> Result<BinaryMask> {
        let img = image::load_from_memory(bytes)?.to_luma8();
        let (width, height) = img.dimensions();
        Ok(BinaryMask {
            width,
            height,
            bits: img.into_raw().into_iter().map(|v| v > 127).collect(),
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode_png()?).map_err(|e| Error::io(path, e))
    }
}

/// 8-bit single-channel image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grayscale {
    /// (R + G + B) / 3, truncated.
    #[default]
    Mean,
    /// Rec. 601 luma, rounded.
    Luma,
}

pub fn grayscale(img: &RasterImage, mode: Grayscale) -> GrayImage {
    let pixels = img
        .pixels
        .chunks_exact(3)
        .map(|p| {
            let (r, g, b) = (p[0] as u32, p[1] as u32, p[2] as u32);
            match mode {
                Grayscale::Mean => ((r + g + b) / 3) as u8,
                Grayscale::Luma => ((299 * r + 587 * g + 114 * b + 500) / 1000) as u8,
            }
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

/// Empty-chamber reference: a photograph or a flat colour.
#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundRef {
    Image(RasterImage),
    Color(Rgb),
}

/// Blackens pixels whose largest per-channel difference from the
/// background is at most `tol`; other pixels are kept unchanged.
pub fn subtract_background(img: &RasterImage, background: &BackgroundRef, tol: u8) -> Result<RasterImage> {
    let mut out = img.clone();
    out.background = [0, 0, 0];
    let bg_at = |i: usize| -> Rgb {
        match background {
            BackgroundRef::Image(b) => [b.pixels[3 * i], b.pixels[3 * i + 1], b.pixels[3 * i + 2]],
            BackgroundRef::Color(c) => *c,
        }
    };
    if let BackgroundRef::Image(b) = background {
        if (b.width, b.height) != (img.width, img.height) {
            return Err(Error::DimensionMismatch(format!(
                "image is {}x{} but background is {}x{}",
                img.width, img.height, b.width, b.height
            )));
        }
    }
    for (i, px) in out.pixels.chunks_exact_mut(3).enumerate() {
        let bg = bg_at(i);
        let diff = (0..3).map(|c| px[c].abs_diff(bg[c])).max().unwrap();
        if diff <= tol {
            px.copy_from_slice(&[0, 0, 0]);
        }
    }
    Ok(out)
}

pub fn histogram(gray: &GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &p in &gray.pixels {
        h[p as usize] += 1;
    }
    h
}

/// 256-bit product of two u128 values as (high, low).
fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    const M: u128 = u64::MAX as u128;
    let (a0, a1, b0, b1) = (a & M, a >> 64, b & M, b >> 64);
    let ll = a0 * b0;
    let lh = a0 * b1;
    let hl = a1 * b0;
    let hh = a1 * b1;
    let mid = (ll >> 64) + (lh & M) + (hl & M);
    let lo = (ll & M) | (mid << 64);
    let hi = hh + (lh >> 64) + (hl >> 64) + (mid >> 64);
    (hi, lo)
}

/// Otsu threshold: the `t` maximising between-class variance of the
/// classes `<= t` and `> t`, compared exactly in integers; the lowest `t`
/// wins ties. The mask is `pixel > t`. When every pixel has the same value
/// no split exists and `t` is that value (the mask is then empty).
pub fn otsu_threshold(gray: &GrayImage) -> (u8, BinaryMask) {
    let h = histogram(gray);
    let n: u64 = h.iter().sum();
    let total: u64 = h.iter().enumerate().map(|(i, &c)| i as u64 * c).sum();
    // best so far as the fraction num / den of scaled variance
    let mut best: Option<(u8, u128, u128)> = None;
    let (mut w0, mut s0) = (0u64, 0u64);
    for t in 0..256usize {
        w0 += h[t];
        s0 += t as u64 * h[t];
        let w1 = n - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let s1 = total - s0;
        // n² σ_b² = (s0·w1 − s1·w0)² / (w0·w1)
        let d = (s0 as i128 * w1 as i128 - s1 as i128 * w0 as i128).unsigned_abs();
        let num = d * d;
        let den = w0 as u128 * w1 as u128;
        let better = match best {
            None => true,
            Some((_, bn, bd)) => mul_wide(num, bd) > mul_wide(bn, den),
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    let t = match best {
        Some((t, _, _)) => t,
        None => gray.pixels.first().copied().unwrap_or(0),
    };
    let mask = BinaryMask {
        width: gray.width,
        height: gray.height,
        bits: gray.pixels.iter().map(|&p| p > t).collect(),
    };
    (t, mask)
}

/// Excess-green index 2G − R − B per pixel.
pub fn excess_green(img: &RasterImage) -> Vec<i32> {
    img.pixels
        .chunks_exact(3)
        .map(|p| 2 * p[1] as i32 - p[0] as i32 - p[2] as i32)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentOptions {
    pub background_tol: u8,
    pub exg_threshold: i32,
    pub grayscale: Grayscale,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            background_tol: 10,
            exg_threshold: DEFAULT_EXG_THRESHOLD,
            grayscale: Grayscale::Mean,
        }
    }
}

/// Background subtraction, then Otsu on the grayscale foreground,
/// intersected with `ExG > exg_threshold`.
pub fn segment_plant(img: &RasterImage, background: &BackgroundRef, opts: &SegmentOptions) -> Result<BinaryMask> {
    let fg = subtract_background(img, background, opts.background_tol)?;
    let (_, otsu) = otsu_threshold(&grayscale(&fg, opts.grayscale));
    let exg = BinaryMask {
        width: fg.width,
        height: fg.height,
        bits: excess_green(&fg).into_iter().map(|e| e > opts.exg_threshold).collect(),
    };
    otsu.and(&exg)
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull of the foreground pixel centres (monotone chain), in
/// counter-clockwise order without collinear points.
pub fn convex_hull(mask: &BinaryMask) -> Vec<(i64, i64)> {
    // only the leftmost and rightmost pixel of each row can be hull vertices
    let mut pts = Vec::new();
    let w = mask.width as usize;
    for y in 0..mask.height as usize {
        let row = &mask.bits[y * w..(y + 1) * w];
        if let Some(first) = row.iter().position(|&b| b) {
            let last = row.iter().rposition(|&b| b).unwrap();
            pts.push((first as i64, y as i64));
            if last != first {
                pts.push((last as i64, y as i64));
            }
        }
    }
    pts.sort_unstable();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(i64, i64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Shoelace area of [`convex_hull`] in pixel² units; 0 for fewer than
/// three non-collinear pixels.
pub fn convex_hull_area(mask: &BinaryMask) -> f64 {
    let hull = convex_hull(mask);
    if hull.len() < 3 {
        return 0.0;
    }
    let twice: i64 = (0..hull.len())
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    twice.abs() as f64 / 2.0
}

/// Index of the view whose segmented mask has the larger hull; ties → 0.
pub fn select_best_view(
    views: [&RasterImage; 2],
    backgrounds: [&BackgroundRef; 2],
    opts: &SegmentOptions,
) -> Result<(usize, [f64; 2])> {
    let a0 = convex_hull_area(&segment_plant(views[0], backgrounds[0], opts)?);
    let a1 = convex_hull_area(&segment_plant(views[1], backgrounds[1], opts)?);
    Ok((if a1 > a0 { 1 } else { 0 }, [a0, a1]))
}

pub fn load_image(path: &Path) -> Result<RasterImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

