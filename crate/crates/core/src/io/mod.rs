//! File formats: frame and segment CSVs, dataset manifests, normalization
//! sidecars, and split loading.

mod csv;
mod dataset;
mod manifest;

use std::io::Write;
use std::path::Path;

pub use self::csv::{
    format_real, frame_csv_string, parse_frame_csv, read_frame_csv, read_segment_csv,
    write_frame_csv, write_segment_csv, FRAME_CSV_HEADER,
};
pub use dataset::{
    feature_order, load_split, series_to_tensor, FeatureLevel, LoadOptions, NormStats, Sample,
};
pub use manifest::{
    parse_manifest, read_manifest, write_manifest, Label, Manifest, ManifestEntry, Split,
};

use crate::error::{Error, Result};

/// Writes `bytes` to a temporary file beside `path` and renames it into
/// place, creating parent directories as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Input(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
