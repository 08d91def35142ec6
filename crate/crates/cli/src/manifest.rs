//! Dataset manifest: tiles per split with their provenance.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use fractoseg_core::image::GrayImage;
use fractoseg_core::mask::ClassMask;
use fractoseg_core::train::TileSource;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::image_io::{read_gray, read_mask};

pub const SPLITS: [&str; 3] = ["train", "val", "test"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Paths are relative to the manifest's directory unless absolute.
    pub image: PathBuf,
    pub mask: PathBuf,
    pub source: PathBuf,
    /// Tile origin `[y, x]` in the source image.
    pub origin: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub tile_size: usize,
    pub splits: BTreeMap<String, Vec<ManifestEntry>>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<LoadedManifest> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::data(path, format!("invalid manifest: {e}")))?;
        manifest
            .check_disjoint()
            .map_err(|m| CliError::data(path, m))?;
        Ok(LoadedManifest {
            root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            manifest,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(CliError::io(path))
    }

    /// Fails if any source image contributes tiles to more than one split.
    pub fn check_disjoint(&self) -> std::result::Result<(), String> {
        let mut owner: BTreeMap<&Path, &str> = BTreeMap::new();
        for (split, entries) in &self.splits {
            for e in entries {
                if let Some(prev) = owner.insert(&e.source, split) {
                    if prev != split {
                        return Err(format!(
                            "source {} appears in splits {prev} and {split}",
                            e.source.display()
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn sources(&self, split: &str) -> BTreeSet<&Path> {
        self.splits
            .get(split)
            .into_iter()
            .flatten()
            .map(|e| e.source.as_path())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

impl LoadedManifest {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn split(&self, name: &str) -> Result<SplitSource<'_>> {
        let entries = self
            .manifest
            .splits
            .get(name)
            .filter(|e| !e.is_empty())
            .ok_or_else(|| CliError::Input(format!("manifest has no {name} tiles")))?;
        Ok(SplitSource {
            manifest: self,
            entries,
        })
    }
}

/// Tiles of one split, read from disk on demand.
pub struct SplitSource<'a> {
    manifest: &'a LoadedManifest,
    pub entries: &'a [ManifestEntry],
}

impl SplitSource<'_> {
    pub fn read(&self, index: usize) -> Result<(GrayImage, ClassMask)> {
        let e = &self.entries[index];
        let (ip, mp) = (
            self.manifest.resolve(&e.image),
            self.manifest.resolve(&e.mask),
        );
        let image = read_gray(&ip)?;
        let mask = read_mask(&mp)?;
        if (mask.height, mask.width) != (image.height, image.width) {
            return Err(CliError::data(&mp, "mask size differs from its image"));
        }
        Ok((image, mask))
    }

    pub fn image_path(&self, index: usize) -> PathBuf {
        self.manifest.resolve(&self.entries[index].image)
    }
}

impl TileSource for SplitSource<'_> {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn tile(&self, index: usize) -> fractoseg_core::Result<(GrayImage, ClassMask)> {
        self.read(index)
            .map_err(|e| fractoseg_core::Error::Source(e.to_string()))
    }
}
