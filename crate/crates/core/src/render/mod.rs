//! Software rasterizer producing an RGB image and a matching organ id buffer.

mod image;
mod raster;
mod texture;

pub use self::image::{decode_image, encode_image, Dimensions, OrganIdBuffer, RasterImage};
pub use raster::{render, Camera, Light, Projection, MIN_RESOLUTION};
pub use texture::{register_texture, texture, Texture, CANOLA_LEAF};
