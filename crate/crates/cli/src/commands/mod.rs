pub mod decode;
pub mod eval;
pub mod extract;
pub mod simulate;
pub mod train;

use std::path::{Path, PathBuf};

use udfront_core::sim::ArrayGeometry;
use udfront_core::{Error, Result};

/// Subsystem seed tags hashed from the master `--seed`.
pub const SEED_TAG_SIMULATE: u64 = 1;
pub const SEED_TAG_TRAIN: u64 = 2;
pub const SEED_TAG_DECODE: u64 = 3;
pub const SEED_TAG_EVAL: u64 = 4;

/// Load a geometry file, or the default 8-microphone circle when no path
/// is given.
pub fn load_geometry(path: Option<&Path>) -> Result<ArrayGeometry> {
    match path {
        Some(p) => ArrayGeometry::from_config_str(&std::fs::read_to_string(p)?),
        None => Ok(ArrayGeometry::default_circular_8ch()),
    }
}

/// Write text atomically (temporary sibling + rename).
pub fn write_text_atomic(path: &Path, text: &str) -> Result<()> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Parse a comma-separated list of layer widths.
pub fn parse_hidden(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad hidden layer width '{s}'")))
        })
        .collect()
}

/// Pair up repeated per-utterance path lists.
pub fn zip_same_length<'a>(
    a: &'a [String],
    b: &'a [String],
    what: &str,
) -> Result<Vec<(PathBuf, PathBuf)>> {
    if a.len() != b.len() {
        return Err(Error::dimension(format!(
            "{} lists differ in length: {} vs {}",
            what,
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| (PathBuf::from(x), PathBuf::from(y)))
        .collect())
}
