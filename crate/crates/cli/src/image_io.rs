//! 8-bit PNG images and class masks on disk.

use std::path::Path;

use fractoseg_core::image::{GrayImage, RgbImage};
use fractoseg_core::mask::{is_valid_id, ClassMask};
use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{CliError, Result};

/// Rec.601 luma, rounded to the nearest integer.
pub fn luma601(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
        .round()
        .clamp(0.0, 255.0) as u8
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| CliError::data(path, e))
}

/// Reads a grayscale micrograph. Color images are converted with Rec.601
/// weights and a warning; 16-bit images are reduced to their high byte.
pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageLumaA16(_) => img.to_luma8().into_raw(),
        other => {
            log::warn!(
                "{}: color image converted to grayscale (Rec.601 luma)",
                path.display()
            );
            other
                .to_rgb8()
                .pixels()
                .map(|p| luma601(p[0], p[1], p[2]))
                .collect()
        }
    };
    GrayImage::new(w, h, pixels).map_err(|e| CliError::data(path, e))
}

/// Reads a single-channel 8-bit mask whose values are all class ids.
pub fn read_mask(path: &Path) -> Result<ClassMask> {
    let img = open(path)?;
    let DynamicImage::ImageLuma8(buf) = img else {
        return Err(CliError::data(
            path,
            "mask must be a single-channel 8-bit PNG",
        ));
    };
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let ids = buf.into_raw();
    if let Some(bad) = ids.iter().find(|&&v| !is_valid_id(v)) {
        return Err(CliError::data(
            path,
            format!("mask value {bad} is not a class id (0, 1, 2 or 255)"),
        ));
    }
    ClassMask::new(h, w, ids).map_err(|e| CliError::data(path, e))
}

fn save(path: &Path, img: DynamicImage) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CliError::data(path, e))
}

pub fn write_gray(path: &Path, img: &GrayImage) -> Result<()> {
    let buf = ImageBuffer::<Luma<u8>, _>::from_raw(
        img.width as u32,
        img.height as u32,
        img.pixels.clone(),
    )
    .expect("buffer matches dimensions");
    save(path, DynamicImage::ImageLuma8(buf))
}

pub fn write_mask(path: &Path, mask: &ClassMask) -> Result<()> {
    let buf = ImageBuffer::<Luma<u8>, _>::from_raw(
        mask.width as u32,
        mask.height as u32,
        mask.ids.clone(),
    )
    .expect("buffer matches dimensions");
    save(path, DynamicImage::ImageLuma8(buf))
}

pub fn write_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    let buf = ImageBuffer::<Rgb<u8>, _>::from_raw(
        img.width as u32,
        img.height as u32,
        img.pixels.clone(),
    )
    .expect("buffer matches dimensions");
    save(path, DynamicImage::ImageRgb8(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luma_weights() {
        assert_eq!(luma601(255, 255, 255), 255);
        assert_eq!(luma601(255, 0, 0), 76);
        assert_eq!(luma601(0, 255, 0), 150);
        assert_eq!(luma601(0, 0, 255), 29);
    }

    #[test]
    fn gray_and_mask_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::new(3, 2, vec![0, 50, 100, 150, 200, 255]).unwrap();
        let p = dir.path().join("a.png");
        write_gray(&p, &img).unwrap();
        assert_eq!(read_gray(&p).unwrap(), img);
        let mask = ClassMask::new(2, 3, vec![0, 1, 2, 255, 1, 0]).unwrap();
        let q = dir.path().join("sub/m.png");
        write_mask(&q, &mask).unwrap();
        assert_eq!(read_mask(&q).unwrap(), mask);
    }

    #[test]
    fn rgb_input_is_converted_and_bad_masks_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgb.png");
        write_rgb(
            &p,
            &RgbImage {
                width: 1,
                height: 1,
                pixels: vec![255, 0, 0],
            },
        )
        .unwrap();
        assert_eq!(read_gray(&p).unwrap().pixels, vec![76]);
        assert!(matches!(read_mask(&p), Err(CliError::Data { .. })));
        let q = dir.path().join("bad.png");
        write_gray(&q, &GrayImage::new(1, 1, vec![7]).unwrap()).unwrap();
        let err = read_mask(&q).unwrap_err().to_string();
        assert!(err.contains("mask value 7"), "{err}");
    }
}
