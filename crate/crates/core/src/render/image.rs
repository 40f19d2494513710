use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma, Rgb as PixelRgb, RgbImage};

use crate::error::{Error, Result};
use crate::turtle::Rgb;

/// 8-bit RGB raster, row-major, no alpha.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
    pub background: Rgb,
}

impl RasterImage {
    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(3 * n);
        for _ in 0..n {
            pixels.extend_from_slice(&color);
        }
        Self {
            width,
            height,
            pixels,
            background: color,
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>, background: Rgb) -> Result<Self> {
        if pixels.len() != width as usize * height as usize * 3 {
            return Err(Error::DimensionMismatch(format!(
                "pixel buffer of {} bytes for a {width}x{height} RGB image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            background,
        })
    }

    fn index(&self, x: u32, y: u32) -> usize {
        3 * (y as usize * self.width as usize + x as usize)
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = self.index(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, c: Rgb) {
        let i = self.index(x, y);
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn same_size<T: Dimensions>(&self, other: &T) -> bool {
        (self.width, self.height) == other.dimensions()
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        ImageBuffer::from_raw(self.width, self.height, self.pixels.clone()).expect("buffer length checked")
    }

    pub fn from_rgb_image(img: RgbImage) -> Self {
        let (width, height) = img.dimensions();
        Self {
            width,
            height,
            pixels: img.into_raw(),
            background: [0, 0, 0],
        }
    }

    /// Reads any format the `image` crate was built with (PNG here).
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        decode_image(&bytes)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        std::fs::write(path, encode_image(self)?).map_err(|e| Error::io(path, e))
    }
}

pub trait Dimensions {
    fn dimensions(&self) -> (u32, u32);
}

impl Dimensions for RasterImage {
    fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

/// Per-pixel organ identity after rasterization; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrganIdBuffer {
    pub width: u32,
    pub height: u32,
    pub ids: Vec<u32>,
}

impl OrganIdBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            ids: vec![0; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.ids[y as usize * self.width as usize + x as usize]
    }

    /// Number of pixels showing `organ_id`.
    pub fn count(&self, organ_id: u32) -> usize {
        self.ids.iter().filter(|&&i| i == organ_id).count()
    }

    /// Visible pixel totals for every organ id present, sorted by id.
    pub fn histogram(&self) -> std::collections::BTreeMap<u32, usize> {
        let mut out = std::collections::BTreeMap::new();
        for &i in &self.ids {
            if i != 0 {
                *out.entry(i).or_insert(0) += 1;
            }
        }
        out
    }

    /// Debug dump as a 16-bit grayscale PNG (ids saturate at 65535).
    pub fn encode_png16(&self) -> Result<Vec<u8>> {
        let data: Vec<u16> = self.ids.iter().map(|&i| i.min(u16::MAX as u32) as u16).collect();
        let img: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width, self.height, data).expect("buffer length checked");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }
}

impl Dimensions for OrganIdBuffer {
    fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

/// Lossless PNG encoding, 8-bit RGB.
pub fn encode_image(img: &RasterImage) -> Result<Vec<u8>> {
    let buf: ImageBuffer<PixelRgb<u8>, &[u8]> =
        ImageBuffer::from_raw(img.width, img.height, img.pixels.as_slice()).ok_or_else(|| {
            Error::DimensionMismatch(format!("pixel buffer does not match {}x{}", img.width, img.height))
        })?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    let img = image::load_from_memory(bytes)?.to_rgb8();
    Ok(RasterImage::from_rgb_image(img))
}
