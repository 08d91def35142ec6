//! `evaluate`: scores predictions against a manifest split's ground truth.

use std::path::{Path, PathBuf};

use fractoseg_core::image::brightness_mask;
use fractoseg_core::metrics::{evaluate_pair_set, EvalOptions, EvalPair, EvalReport};
use fractoseg_core::quantify::{area_fractions, AreaFractions};

use super::predict::{mask_file, predict_image};
use crate::config::RunConfig;
use crate::error::{CliError, Result, WithPath};
use crate::image_io::read_mask;
use crate::manifest::DatasetManifest;
use crate::weights_io::load_weights;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";

#[derive(Debug, Clone)]
pub enum Predictions {
    /// Run the network from this weight file.
    Weights(PathBuf),
    /// Read `<image stem>_mask.png` files written by `predict`.
    MaskDir(PathBuf),
}

pub fn evaluate(
    manifest_path: &Path,
    split: &str,
    predictions: &Predictions,
    out_dir: &Path,
    config: &RunConfig,
) -> Result<EvalReport> {
    let loaded = DatasetManifest::load(manifest_path)?;
    let source = loaded.split(split)?;
    let model = match predictions {
        Predictions::Weights(p) => Some(load_weights(p, None)?),
        Predictions::MaskDir(_) => None,
    };
    let threshold = config.eval.brightness_threshold;
    let mut gts = Vec::with_capacity(source.entries.len());
    let mut preds = Vec::with_capacity(source.entries.len());
    let mut evaluable = Vec::with_capacity(source.entries.len());
    for i in 0..source.entries.len() {
        let (image, gt) = source.read(i)?;
        let image_path = source.image_path(i);
        let pred = match (&model, predictions) {
            (Some(m), _) => predict_image(m, &image).at(&image_path)?,
            (None, Predictions::MaskDir(dir)) => {
                let p = mask_file(dir, &image_path);
                let pred = read_mask(&p)?;
                if (pred.height, pred.width) != (gt.height, gt.width) {
                    return Err(CliError::data(
                        &p,
                        "prediction size differs from the ground truth",
                    ));
                }
                pred
            }
            (None, Predictions::Weights(_)) => unreachable!("model loaded above"),
        };
        evaluable.push(threshold.map(|t| brightness_mask(&image, t)));
        gts.push(gt);
        preds.push(pred);
    }
    let pairs: Vec<EvalPair<'_>> = (0..gts.len())
        .map(|i| EvalPair {
            gt: &gts[i],
            pred: &preds[i],
            evaluable: evaluable[i].as_deref(),
        })
        .collect();
    let options = EvalOptions {
        beta: config.eval.beta,
        brightness_threshold: threshold,
        ..EvalOptions::default()
    };
    let mut report = evaluate_pair_set(&pairs, &options).at(manifest_path)?;
    let fractions = pairs
        .iter()
        .map(|p| area_fractions(p.pred, p.evaluable))
        .collect::<fractoseg_core::Result<Vec<_>>>()?;
    report.area_fractions = Some(AreaFractions::pooled(&fractions));

    config.echo(out_dir)?;
    let json_path = out_dir.join(REPORT_JSON);
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&json_path, text + "\n").map_err(CliError::io(&json_path))?;
    let text_path = out_dir.join(REPORT_TEXT);
    std::fs::write(&text_path, format!("{report}\n")).map_err(CliError::io(&text_path))?;
    Ok(report)
}
