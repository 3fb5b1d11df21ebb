//! All-or-nothing output files.
//!
//! Contents are staged in memory and only written when [`Outputs::commit`]
//! runs. Each file goes to a temporary sibling first and is renamed into
//! place; if any step fails, everything written so far is removed,
//! including directories created for the outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

#[derive(Debug, Default)]
pub struct Outputs {
    staged: Vec<(PathBuf, String)>,
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.partial-{}", std::process::id()))
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stage(&mut self, path: impl Into<PathBuf>, contents: String) {
        self.staged.push((path.into(), contents));
    }

    pub fn commit(self) -> Result<()> {
        let mut created = Vec::new();
        let mut temps = Vec::with_capacity(self.staged.len());
        for (path, contents) in &self.staged {
            let tmp = temp_path(path);
            let written =
                create_parents(path, &mut created).and_then(|()| Ok(fs::write(&tmp, contents)?));
            if let Err(e) = written {
                let _ = fs::remove_file(&tmp);
                cleanup(&temps, &[], &created);
                return Err(e).with_context(|| format!("writing {}", path.display()));
            }
            temps.push(tmp);
        }
        let mut placed: Vec<&Path> = Vec::with_capacity(temps.len());
        for (tmp, (path, _)) in temps.iter().zip(&self.staged) {
            if let Err(e) = fs::rename(tmp, path) {
                cleanup(&temps, &placed, &created);
                return Err(e)
                    .with_context(|| format!("moving output into place at {}", path.display()));
            }
            placed.push(path);
        }
        Ok(())
    }
}

/// Creates missing ancestors of `path`, recording each new directory.
fn create_parents(path: &Path, created: &mut Vec<PathBuf>) -> Result<()> {
    let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) else {
        return Ok(());
    };
    let mut missing: Vec<&Path> = parent
        .ancestors()
        .take_while(|p| !p.as_os_str().is_empty() && !p.exists())
        .collect();
    missing.reverse();
    for dir in missing {
        fs::create_dir(dir)?;
        created.push(dir.to_path_buf());
    }
    Ok(())
}

fn cleanup(temps: &[PathBuf], placed: &[&Path], created: &[PathBuf]) {
    for p in temps {
        let _ = fs::remove_file(p);
    }
    for p in placed {
        let _ = fs::remove_file(p);
    }
    for dir in created.iter().rev() {
        let _ = fs::remove_dir(dir);
    }
}
