//! Cutting large micrographs and their masks into fixed-size tiles.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::mask::ClassMask;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tile {
    pub image: GrayImage,
    pub mask: ClassMask,
    /// Top-left corner `(y, x)` in the source image.
    pub origin: (usize, usize),
}

/// Top-left corners of every full tile on a grid with step `stride`.
/// Partial tiles at the bottom and right borders are dropped.
pub fn tile_origins(
    height: usize,
    width: usize,
    tile_size: usize,
    stride: usize,
) -> Vec<(usize, usize)> {
    if tile_size == 0 || stride == 0 || tile_size > height || tile_size > width {
        return Vec::new();
    }
    let ys = (0..=height - tile_size).step_by(stride);
    ys.flat_map(|y| (0..=width - tile_size).step_by(stride).map(move |x| (y, x)))
        .collect()
}

/// Tiles `image` and `mask` together. `tile_size` must be a multiple of 32.
pub fn tile(
    image: &GrayImage,
    mask: &ClassMask,
    tile_size: usize,
    stride: usize,
) -> Result<Vec<Tile>> {
    if tile_size == 0 || tile_size % 32 != 0 {
        return Err(Error::invalid(
            "tile",
            alloc::format!("tile size {tile_size} is not a positive multiple of 32"),
        ));
    }
    if stride == 0 {
        return Err(Error::invalid("tile", "stride must be positive"));
    }
    if (mask.height, mask.width) != (image.height, image.width) {
        return Err(Error::shape(
            "tile",
            "mask size",
            image.height * image.width,
            mask.len(),
        ));
    }
    if tile_size > image.height || tile_size > image.width {
        log::warn!(
            "tile size {tile_size} exceeds {}x{} image; no tiles produced",
            image.height,
            image.width
        );
        return Ok(Vec::new());
    }
    tile_origins(image.height, image.width, tile_size, stride)
        .into_iter()
        .map(|(y, x)| {
            Ok(Tile {
                image: image.crop(y, x, tile_size, tile_size)?,
                mask: mask.crop(y, x, tile_size, tile_size)?,
                origin: (y, x),
            })
        })
        .collect()
}
