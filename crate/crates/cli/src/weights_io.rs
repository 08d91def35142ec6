use std::path::Path;

use fractoseg_core::unet::{UNetConfig, UNetModel};
use fractoseg_core::weights::{decode, encode, NamedTensor};

use crate::error::{CliError, Result, WithPath};

pub fn save_weights(model: &UNetModel<f32>, path: &Path) -> Result<()> {
    let bytes = encode(&model.to_named_tensors()).at(path)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    // Write then rename so an interrupted save never leaves a truncated file.
    let tmp = path.with_extension("fseg.partial");
    std::fs::write(&tmp, bytes).map_err(CliError::io(&tmp))?;
    std::fs::rename(&tmp, path).map_err(CliError::io(path))
}

pub fn read_tensors(path: &Path) -> Result<Vec<NamedTensor>> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    decode(&bytes).at(path)
}

/// Loads a weight file, recovering the architecture from its tensors. With
/// `expected`, the file must match that architecture exactly.
pub fn load_weights(path: &Path, expected: Option<&UNetConfig>) -> Result<UNetModel<f32>> {
    let tensors = read_tensors(path)?;
    let config = match expected {
        Some(c) => c.clone(),
        None => UNetConfig::infer(&tensors).at(path)?,
    };
    UNetModel::from_named_tensors(config, &tensors).at(path)
}
