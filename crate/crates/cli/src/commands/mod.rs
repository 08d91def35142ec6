pub mod dataset;
pub mod evaluate;
pub mod predict;
pub mod report;
pub mod train;

use std::path::Path;

pub(crate) fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}
