use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

/// Collects the files written by one command and deletes them unless committed.
#[derive(Default)]
pub struct Outputs {
    written: Vec<PathBuf>,
    committed: bool,
}

fn temp_sibling(path: &Path, tag: &str) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!(".{name}.{tag}-{}", std::process::id()))
}

impl Outputs {
    /// Writes `bytes` to a temporary sibling and renames it into place.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating directory {}", parent.display()))?;
        }
        let tmp = temp_sibling(path, "tmp");
        let res = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
        if let Err(e) = res {
            let _ = fs::remove_file(&tmp);
            return Err(e).with_context(|| format!("writing {}", path.display()));
        }
        self.written.push(path.to_path_buf());
        Ok(())
    }

    /// Registers a directory produced elsewhere so that it is removed on failure.
    pub fn track(&mut self, path: &Path) {
        self.written.push(path.to_path_buf());
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in self.written.iter().rev() {
            if p.is_dir() {
                let _ = fs::remove_dir_all(p);
            } else {
                let _ = fs::remove_file(p);
            }
        }
    }
}

/// `<out>.run.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    out.with_file_name(name)
}

#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    argv: Vec<String>,
    config: &'a RunConfig,
    outputs: Vec<String>,
}

pub fn run_record(command: &str, config: &RunConfig, outputs: &[&Path]) -> Result<Vec<u8>> {
    let record = RunRecord {
        tool: "recmap",
        version: env!("CARGO_PKG_VERSION"),
        command,
        argv: std::env::args().skip(1).collect(),
        config,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    Ok(recmap_core::recoverability::io::to_json_bytes(&record)?)
}

/// A scratch directory next to `out` that replaces `out` on [`finish_dir`].
pub fn staging_dir(out: &Path) -> Result<PathBuf> {
    if out.exists() {
        let empty = fs::read_dir(out)
            .with_context(|| format!("reading {}", out.display()))?
            .next()
            .is_none();
        if !empty {
            bail!("output directory {} exists and is not empty", out.display());
        }
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating directory {}", parent.display()))?;
    }
    let stage = temp_sibling(out, "partial");
    if stage.exists() {
        fs::remove_dir_all(&stage)?;
    }
    fs::create_dir(&stage).with_context(|| format!("creating {}", stage.display()))?;
    Ok(stage)
}

pub fn finish_dir(stage: &Path, out: &Path) -> Result<()> {
    if out.exists() {
        fs::remove_dir(out).with_context(|| format!("replacing {}", out.display()))?;
    }
    fs::rename(stage, out).with_context(|| format!("moving dataset into {}", out.display()))
}
