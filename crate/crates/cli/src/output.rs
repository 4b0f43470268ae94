use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Files written by a command. Each file is written to a temporary sibling
/// and renamed into place; if the command fails, `discard` removes every file
/// (and created directory) it produced.
#[derive(Default)]
pub struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl Outputs {
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("writing {}", path.display()))?;
        tmp.write_all(bytes)?;
        tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(path.to_path_buf());
        Ok(())
    }

    pub fn create_dir(&mut self, dir: &Path) -> Result<()> {
        if !dir.exists() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            self.dirs.push(dir.to_path_buf());
        }
        Ok(())
    }

    pub fn discard(self) {
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = std::fs::remove_dir(d);
        }
    }
}
