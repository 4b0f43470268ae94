//! Discovery of labelled point-cloud files on disk.

use std::fs;
use std::path::{Path, PathBuf};

use crate::corpus::CategoryLabel;
use crate::error::{Error, Result};

/// Extensions recognised as point clouds.
pub const CLOUD_EXTENSIONS: [&str; 4] = ["ply", "xyz", "pts", "txt"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloudFile {
    pub path: PathBuf,
    pub label: Option<CategoryLabel>,
}

fn is_cloud(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| CLOUD_EXTENSIONS.iter().any(|c| e.eq_ignore_ascii_case(c)))
}

/// Label from `<file>.label` next to the cloud, if present.
fn sidecar_label(path: &Path) -> Result<Option<CategoryLabel>> {
    let sidecar = path.with_extension("label");
    if !sidecar.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&sidecar)?;
    CategoryLabel::new(text.trim())
        .map(Some)
        .map_err(|e| Error::Validation(format!("{}: {e}", sidecar.display())))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Point-cloud files under `root`, sorted by path.
///
/// `root` may be a single cloud file. Otherwise clouds directly inside it are
/// labelled by a `<name>.label` sidecar file, and clouds one directory down
/// take the directory name as their label unless a sidecar overrides it.
pub fn find_clouds(root: &Path) -> Result<Vec<CloudFile>> {
    if root.is_file() {
        return Ok(vec![CloudFile {
            path: root.to_path_buf(),
            label: sidecar_label(root)?,
        }]);
    }
    let mut out = Vec::new();
    for entry in sorted_entries(root)? {
        if entry.is_dir() {
            let dir_label = entry
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| CategoryLabel::new(n).ok());
            for inner in sorted_entries(&entry)? {
                if is_cloud(&inner) {
                    let label = sidecar_label(&inner)?.or_else(|| dir_label.clone());
                    out.push(CloudFile { path: inner, label });
                }
            }
        } else if is_cloud(&entry) {
            let label = sidecar_label(&entry)?;
            out.push(CloudFile { path: entry, label });
        }
    }
    Ok(out)
}
