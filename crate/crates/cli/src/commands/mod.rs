pub mod ablate;
pub mod benchmark;
pub mod impute;
pub mod ingest;
pub mod train;

use std::path::Path;

use anyhow::{Context, Result};

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Sibling path with an extra suffix: `out.csv` -> `out.csv.report.txt`.
pub fn with_suffix(path: &Path, suffix: &str) -> std::path::PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}
