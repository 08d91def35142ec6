//! `train`: fits the U-net on a manifest's train split, validating on `val`.

use std::io::Write;
use std::path::Path;

use fractoseg_core::train::{BestTracker, EpochLog, TileSource, Trainer};
use fractoseg_core::unet::UNetModel;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::DatasetManifest;
use crate::weights_io::{read_tensors, save_weights};

pub const LOG_FILE: &str = "train_log.jsonl";
pub const BEST_WEIGHTS: &str = "best.fseg";
pub const FINAL_WEIGHTS: &str = "final.fseg";

pub fn train(manifest_path: &Path, out_dir: &Path, config: &RunConfig) -> Result<Vec<EpochLog>> {
    let loaded = DatasetManifest::load(manifest_path)?;
    let train_split = loaded.split("train")?;
    let val_split = loaded.split("val").ok();
    let model_config = config.model.resolve()?;
    if loaded.manifest.tile_size % model_config.multiple() != 0 {
        return Err(CliError::Config(format!(
            "tile size {} is not divisible by {} as {} pooling stages require",
            loaded.manifest.tile_size,
            model_config.multiple(),
            model_config.stages
        )));
    }
    config.echo(out_dir)?;

    let mut model = UNetModel::<f32>::build(model_config, config.seed)?;
    match &config.train.encoder_weights {
        Some(p) => {
            let tensors = read_tensors(p)?;
            model
                .import_encoder(&tensors, config.train.freeze_encoder)
                .map_err(|e| CliError::data(p, e))?;
            log::info!("encoder imported from {}", p.display());
        }
        None if config.train.freeze_encoder => {
            log::warn!("freezing a randomly initialized encoder");
            model.set_encoder_frozen(true);
        }
        None => {}
    }

    let val_len = val_split.as_ref().map_or(0, |v| v.len());
    let mut trainer = Trainer::new(model, config.train_config(), train_split.len(), val_len)?;
    let log_path = out_dir.join(LOG_FILE);
    let mut log_file = std::fs::File::create(&log_path).map_err(CliError::io(&log_path))?;
    let mut best = BestTracker::default();
    let mut logs = Vec::new();
    for _ in 0..config.train.epochs {
        let log = trainer.run_epoch(
            &train_split,
            val_split.as_ref().map(|v| v as &dyn TileSource),
        )?;
        let line = serde_json::to_string(&log).expect("log line serializes");
        writeln!(log_file, "{line}").map_err(CliError::io(&log_path))?;
        log::info!("{line}");
        if best.observe(&log, trainer.model()) {
            save_weights(trainer.model(), &out_dir.join(BEST_WEIGHTS))?;
        }
        logs.push(log);
    }
    let model = trainer.into_model();
    save_weights(&model, &out_dir.join(FINAL_WEIGHTS))?;
    if best.best().is_none() {
        save_weights(&model, &out_dir.join(BEST_WEIGHTS))?;
    }
    Ok(logs)
}
