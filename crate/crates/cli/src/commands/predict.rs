//! `predict`: per-pixel classification of micrographs of any size.

use std::path::{Path, PathBuf};

use fractoseg_core::image::{brightness_mask, images_to_tensor, GrayImage};
use fractoseg_core::mask::ClassMask;
use fractoseg_core::quantify::{area_fractions, classify, overlay, AreaFractions, OverlayStyle};
use fractoseg_core::unet::UNetModel;
use serde::{Deserialize, Serialize};

use super::file_stem;
use crate::config::RunConfig;
use crate::error::{CliError, Result, WithPath};
use crate::image_io::{read_gray, write_mask, write_rgb};
use crate::weights_io::load_weights;

/// Classifies an image of any size: reflect-pads the bottom and right edges
/// up to the network's size multiple and crops the result back.
pub fn predict_image(
    model: &UNetModel<f32>,
    image: &GrayImage,
) -> fractoseg_core::Result<ClassMask> {
    let m = model.config().multiple();
    let (h, w) = (image.height.div_ceil(m) * m, image.width.div_ceil(m) * m);
    let padded;
    let input = if (h, w) == (image.height, image.width) {
        image
    } else {
        padded = image.reflect_pad(h, w)?;
        &padded
    };
    let logits = model.infer(&images_to_tensor::<f32>(&[input])?)?;
    let mask = classify(&logits)?;
    if (h, w) == (image.height, image.width) {
        Ok(mask)
    } else {
        mask.crop(0, 0, image.height, image.width)
    }
}

pub fn mask_file(out_dir: &Path, image: &Path) -> PathBuf {
    out_dir.join(format!("{}_mask.png", file_stem(image)))
}

/// Per-image quantification written next to the mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub image: PathBuf,
    pub height: usize,
    pub width: usize,
    pub mask: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlay: Option<PathBuf>,
    pub area_fractions: AreaFractions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brightness_threshold: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub area_fractions_brightness_masked: Option<AreaFractions>,
}

pub fn predict(
    weights: &Path,
    images: &[PathBuf],
    out_dir: &Path,
    with_overlay: bool,
    config: &RunConfig,
) -> Result<Vec<PredictionRecord>> {
    if images.is_empty() {
        return Err(CliError::Input("no images given".into()));
    }
    let model = load_weights(weights, None)?;
    config.echo(out_dir)?;
    let style = OverlayStyle::default();
    let threshold = config.eval.brightness_threshold;
    let mut records = Vec::with_capacity(images.len());
    for path in images {
        let image = read_gray(path)?;
        let mask = predict_image(&model, &image).at(path)?;
        let mask_path = mask_file(out_dir, path);
        write_mask(&mask_path, &mask)?;
        let overlay_path = if with_overlay {
            let p = out_dir.join(format!("{}_overlay.png", file_stem(path)));
            write_rgb(&p, &overlay(&image, &mask, &style).at(path)?)?;
            Some(p)
        } else {
            None
        };
        let masked = match threshold {
            Some(t) => Some(area_fractions(&mask, Some(&brightness_mask(&image, t))).at(path)?),
            None => None,
        };
        let record = PredictionRecord {
            image: path.clone(),
            height: image.height,
            width: image.width,
            mask: mask_path,
            overlay: overlay_path,
            area_fractions: area_fractions(&mask, None).at(path)?,
            brightness_threshold: threshold,
            area_fractions_brightness_masked: masked,
        };
        let json_path = out_dir.join(format!("{}_fractions.json", file_stem(path)));
        let text = serde_json::to_string_pretty(&record).expect("record serializes");
        std::fs::write(&json_path, text + "\n").map_err(CliError::io(&json_path))?;
        log::info!(
            "{}: intergranular {:?} transgranular {:?}",
            path.display(),
            record.area_fractions.intergranular_fraction,
            record.area_fractions.transgranular_fraction
        );
        records.push(record);
    }
    Ok(records)
}
