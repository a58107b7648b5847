//! Artifact writing and the per-directory manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use landsense_core::artifact::{sha256_hex, TOOL_VERSION};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    /// Keyed by file name relative to the output directory.
    pub artifacts: BTreeMap<String, ManifestEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sha256: String,
    pub bytes: u64,
    pub command: String,
}

/// Collects the files one command writes into `--out` and records them in
/// `manifest.json`, keeping entries left there by earlier commands.
pub struct OutputDir {
    dir: PathBuf,
    command: String,
    written: Vec<(String, String, u64)>,
}

impl OutputDir {
    pub fn create(dir: &Path, command: &str) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), command: command.to_string(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path(name);
        fs::write(&path, bytes)?;
        self.written.push((name.to_string(), sha256_hex(bytes), bytes.len() as u64));
        Ok(path)
    }

    pub fn finish(self) -> CliResult<Vec<PathBuf>> {
        let manifest_path = self.dir.join(MANIFEST);
        let mut manifest = match fs::read_to_string(&manifest_path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("existing {} is unreadable: {e}", manifest_path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest::default(),
            Err(e) => return Err(e.into()),
        };
        manifest.tool_version = TOOL_VERSION.to_string();
        let mut paths = Vec::new();
        for (name, sha256, bytes) in self.written {
            paths.push(self.dir.join(&name));
            manifest.artifacts.insert(name, ManifestEntry { sha256, bytes, command: self.command.clone() });
        }
        fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(paths)
    }
}

/// Reads an input file, reporting a missing path distinctly.
pub fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    if !path.is_file() {
        return Err(CliError::Missing(path.to_path_buf()));
    }
    Ok(fs::read(path)?)
}

pub fn read_input_text(path: &Path) -> CliResult<String> {
    String::from_utf8(read_input(path)?).map_err(|_| CliError::Usage(format!("{} is not UTF-8", path.display())))
}

/// `data.csv` → `data.meta.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}
