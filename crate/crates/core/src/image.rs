//! In-memory 8-bit images.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Default brightness cut-off: pixels brighter than this are not evaluated.
pub const DEFAULT_BRIGHTNESS_THRESHOLD: u8 = 220;

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Row-major interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::shape(
                "GrayImage::new",
                "pixel count",
                width * height,
                pixels.len(),
            ));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Copy of the `height × width` window at `(y, x)`.
    pub fn crop(&self, y: usize, x: usize, height: usize, width: usize) -> Result<Self> {
        if y + height > self.height || x + width > self.width {
            return Err(Error::invalid(
                "GrayImage::crop",
                "window exceeds image bounds",
            ));
        }
        let mut pixels = Vec::with_capacity(width * height);
        for row in y..y + height {
            pixels.extend_from_slice(
                &self.pixels[row * self.width + x..row * self.width + x + width],
            );
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// Extends the image to `height × width` by mirror reflection at the
    /// bottom and right edges (edge pixel not repeated).
    pub fn reflect_pad(&self, height: usize, width: usize) -> Result<Self> {
        if height < self.height || width < self.width || self.height == 0 || self.width == 0 {
            return Err(Error::invalid(
                "GrayImage::reflect_pad",
                "target smaller than image",
            ));
        }
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            let sy = reflect_index(y, self.height);
            for x in 0..width {
                pixels.push(self.get(sy, reflect_index(x, self.width)));
            }
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn to_rgb(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().flat_map(|&v| [v, v, v]).collect(),
        }
    }
}

/// Mirror index into `0..len` without repeating the edge sample, periodic
/// with period `2·(len − 1)`.
pub fn reflect_index(i: usize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len - 1);
    let r = i % period;
    if r < len {
        r
    } else {
        period - r
    }
}

/// `true` where a pixel is evaluable, i.e. its intensity is at most `threshold`.
pub fn brightness_mask(image: &GrayImage, threshold: u8) -> Vec<bool> {
    image.pixels.iter().map(|&v| v <= threshold).collect()
}

/// Stacks images into an `(N, 1, H, W)` tensor with intensities scaled to `[0, 1]`.
pub fn images_to_tensor<T: Scalar>(images: &[&GrayImage]) -> Result<Tensor<T>> {
    let first = images
        .first()
        .ok_or_else(|| Error::invalid("images_to_tensor", "no images"))?;
    let (h, w) = (first.height, first.width);
    let mut data = Vec::with_capacity(images.len() * h * w);
    let scale = T::from_f64(1.0 / 255.0);
    for img in images {
        if img.height != h {
            return Err(Error::shape("images_to_tensor", "height", h, img.height));
        }
        if img.width != w {
            return Err(Error::shape("images_to_tensor", "width", w, img.width));
        }
        data.extend(img.pixels.iter().map(|&v| T::from_f64(v as f64) * scale));
    }
    Tensor::from_vec([images.len(), 1, h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brightness_threshold_is_strict() {
        let img = GrayImage::new(3, 1, vec![220, 221, 0]).unwrap();
        assert_eq!(
            brightness_mask(&img, DEFAULT_BRIGHTNESS_THRESHOLD),
            vec![true, false, true]
        );
        let dark = GrayImage::filled(4, 4, 0);
        assert!(brightness_mask(&dark, 220).iter().all(|&b| b));
    }

    #[test]
    fn scaling_maps_255_to_one() {
        let img = GrayImage::new(2, 1, vec![255, 0]).unwrap();
        let t: Tensor<f32> = images_to_tensor(&[&img]).unwrap();
        assert_eq!(t.data(), &[1.0, 0.0]);
    }

    #[test]
    fn reflect_pad_mirrors_without_edge_repeat() {
        let img = GrayImage::new(3, 1, vec![1, 2, 3]).unwrap();
        let p = img.reflect_pad(2, 7).unwrap();
        assert_eq!(p.pixels, vec![1, 2, 3, 2, 1, 2, 3, 1, 2, 3, 2, 1, 2, 3]);
        assert_eq!(p.crop(0, 0, 1, 3).unwrap(), img);
    }
}
