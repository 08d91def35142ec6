//! From logits to class masks, overlays and fracture-mode area fractions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{GrayImage, RgbImage};
use crate::mask::{ClassMask, INTERGRANULAR, TRANSGRANULAR};
use crate::tensor::{Scalar, Tensor};

/// Per-pixel argmax of `(1, K, H, W)` logits; ties go to the lowest class id.
pub fn classify<T: Scalar>(logits: &Tensor<T>) -> Result<ClassMask> {
    let d = logits.dims();
    if d.n != 1 {
        return Err(Error::shape("classify", "batch", 1, d.n));
    }
    if d.c == 0 || d.c > 3 {
        return Err(Error::invalid(
            "classify",
            alloc::format!("{} channels, expected 1 to 3", d.c),
        ));
    }
    let plane = d.plane();
    let src = logits.data();
    let ids = (0..plane)
        .map(|p| {
            let mut best = 0;
            for c in 1..d.c {
                if src[c * plane + p] > src[best * plane + p] {
                    best = c;
                }
            }
            best as u8
        })
        .collect();
    ClassMask::new(d.h, d.w, ids)
}

/// Colors for the overlay; intergranular blue and transgranular green by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayStyle {
    pub intergranular: [u8; 3],
    pub transgranular: [u8; 3],
    blend: f64,
}

impl OverlayStyle {
    pub fn new(blend: f64) -> Self {
        OverlayStyle {
            intergranular: [0, 0, 255],
            transgranular: [0, 255, 0],
            blend: if blend.is_nan() {
                0.0
            } else {
                blend.clamp(0.0, 1.0)
            },
        }
    }

    pub fn blend(&self) -> f64 {
        self.blend
    }
}

impl Default for OverlayStyle {
    fn default() -> Self {
        OverlayStyle::new(0.5)
    }
}

/// Grayscale image with intergranular and transgranular pixels alpha-blended
/// toward their colors: `round((1 − α)·gray + α·color)` per channel.
/// Background and void pixels keep their gray value.
pub fn overlay(image: &GrayImage, mask: &ClassMask, style: &OverlayStyle) -> Result<RgbImage> {
    if (image.height, image.width) != (mask.height, mask.width) {
        return Err(Error::shape(
            "overlay",
            "mask size",
            image.height * image.width,
            mask.len(),
        ));
    }
    let a = style.blend;
    let mut out = image.to_rgb();
    for (i, &id) in mask.ids.iter().enumerate() {
        let color = match id {
            INTERGRANULAR => style.intergranular,
            TRANSGRANULAR => style.transgranular,
            _ => continue,
        };
        let g = image.pixels[i] as f64;
        for (ch, &c) in color.iter().enumerate() {
            let v = (1.0 - a) * g + a * c as f64;
            out.pixels[3 * i + ch] = num_traits::Float::floor(v + 0.5).clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

/// Share of each fracture mode among predicted mode pixels (background excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaFractions {
    pub intergranular_pixels: u64,
    pub transgranular_pixels: u64,
    /// `None` when no mode pixel was counted.
    pub intergranular_fraction: Option<f64>,
    pub transgranular_fraction: Option<f64>,
    pub brightness_masked: bool,
}

impl AreaFractions {
    pub fn from_counts(intergranular: u64, transgranular: u64, brightness_masked: bool) -> Self {
        let total = intergranular + transgranular;
        let frac = |n: u64| (total > 0).then(|| n as f64 / total as f64);
        AreaFractions {
            intergranular_pixels: intergranular,
            transgranular_pixels: transgranular,
            intergranular_fraction: frac(intergranular),
            transgranular_fraction: frac(transgranular),
            brightness_masked,
        }
    }

    /// Sum of pixel counts of several images, fractions recomputed.
    pub fn pooled<'a>(items: impl IntoIterator<Item = &'a AreaFractions>) -> Self {
        let (mut i, mut t, mut masked) = (0, 0, false);
        for a in items {
            i += a.intergranular_pixels;
            t += a.transgranular_pixels;
            masked |= a.brightness_masked;
        }
        Self::from_counts(i, t, masked)
    }
}

pub fn area_fractions(mask: &ClassMask, evaluable: Option<&[bool]>) -> Result<AreaFractions> {
    if let Some(e) = evaluable {
        if e.len() != mask.len() {
            return Err(Error::shape(
                "area_fractions",
                "evaluable mask length",
                mask.len(),
                e.len(),
            ));
        }
    }
    let (mut inter, mut trans) = (0u64, 0u64);
    for (i, &id) in mask.ids.iter().enumerate() {
        if evaluable.is_some_and(|e| !e[i]) {
            continue;
        }
        match id {
            INTERGRANULAR => inter += 1,
            TRANSGRANULAR => trans += 1,
            _ => {}
        }
    }
    Ok(AreaFractions::from_counts(
        inter,
        trans,
        evaluable.is_some(),
    ))
}
