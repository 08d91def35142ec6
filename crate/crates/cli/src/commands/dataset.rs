//! `dataset-build`: VIA annotations and source images to a tiled, split dataset.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fractoseg_core::raster::rasterize;
use fractoseg_core::tiling::tile;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::file_stem;
use crate::config::RunConfig;
use crate::error::{CliError, Result, WithPath};
use crate::image_io::{read_gray, write_gray, write_mask};
use crate::manifest::{DatasetManifest, ManifestEntry, SPLITS};
use crate::via::parse_via_json;

/// Seeded assignment of whole source images to train/val/test.
pub fn assign_splits(
    mut sources: Vec<String>,
    ratios: [f64; 3],
    seed: u64,
) -> BTreeMap<&'static str, Vec<String>> {
    sources.sort();
    sources.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = sources.len();
    let n_train = ((ratios[0] * n as f64).round() as usize).min(n);
    let n_val = ((ratios[1] * n as f64).round() as usize).min(n - n_train);
    let mut out = BTreeMap::new();
    let mut rest = sources.into_iter();
    out.insert(SPLITS[0], rest.by_ref().take(n_train).collect());
    out.insert(SPLITS[1], rest.by_ref().take(n_val).collect());
    out.insert(SPLITS[2], rest.collect());
    out
}

pub fn dataset_build(
    via_json: &Path,
    images_dir: &Path,
    out_dir: &Path,
    config: &RunConfig,
) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(via_json).map_err(CliError::io(via_json))?;
    let parsed = parse_via_json(&text).map_err(|e| CliError::data(via_json, e))?;
    if !parsed.warnings.is_empty() {
        log::warn!("{} annotation regions skipped", parsed.warnings.len());
    }
    let project = parsed.project;
    let tile_size = config.data.tile_size;
    let stride = config.data.stride.unwrap_or(tile_size);
    config.echo(out_dir)?;

    let sources: Vec<String> = project.entries.keys().cloned().collect();
    let assignment = assign_splits(sources, config.data.split_ratios, config.seed);
    let mut splits = BTreeMap::new();
    for (split, names) in assignment {
        let mut entries = Vec::new();
        for name in names {
            let source_path = images_dir.join(&name);
            let image = read_gray(&source_path)?;
            let raster = rasterize(&project.entries[&name], image.height, image.width);
            if raster.skipped_degenerate > 0 {
                log::warn!(
                    "{name}: {} degenerate polygons skipped",
                    raster.skipped_degenerate
                );
            }
            let tiles = tile(&image, &raster.mask, tile_size, stride).at(&source_path)?;
            let stem = file_stem(Path::new(&name));
            for t in tiles {
                let (y, x) = t.origin;
                let rel_image = PathBuf::from("tiles").join(format!("{stem}_y{y}_x{x}.png"));
                let rel_mask = PathBuf::from("masks").join(format!("{stem}_y{y}_x{x}.png"));
                write_gray(&out_dir.join(&rel_image), &t.image)?;
                write_mask(&out_dir.join(&rel_mask), &t.mask)?;
                log::debug!(
                    "{}: void fraction {:.3}",
                    rel_mask.display(),
                    t.mask.void_fraction()
                );
                entries.push(ManifestEntry {
                    image: rel_image,
                    mask: rel_mask,
                    source: PathBuf::from(&name),
                    origin: [y, x],
                });
            }
        }
        splits.insert(split.to_string(), entries);
    }
    let manifest = DatasetManifest { tile_size, splits };
    manifest.check_disjoint().map_err(CliError::Input)?;
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}
